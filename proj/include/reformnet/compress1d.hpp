#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "reformnet/errors.hpp"

namespace reformnet {

// One relu unit of a scalar-in/scalar-out shallow network: x -> a*relu(c*x+d).
struct Neuron1D {
    double a = 0.0; // output weight
    double c = 0.0; // input weight
    double d = 0.0; // bias term

    bool balanced(double tol = 1e-12) const;
};

struct ShallowNet1D {
    std::vector<Neuron1D> neurons;
    double bias = 0.0; // output bias b, excluded from the parameter norm

    double operator()(double x) const;
    // sum over neurons of a^2 + c^2 + d^2
    double parameter_norm() const;
};

// Rescales every neuron onto the balanced manifold a^2 = c^2 + d^2 using the
// degree-1 homogeneity of relu; drops neurons that are the zero function
// because a = 0 or (c, d) = (0, 0). Function values are unchanged on all of
// R and the parameter norm never increases.
ShallowNet1D canonicalize(const ShallowNet1D& net);

// The input -d/c where the neuron switches between dead and active;
// none for c = 0 (no kink).
std::optional<double> cusp(const Neuron1D& neuron);

// Replaces two canonicalized neurons with matching sign(a) and sign(c) by the
// single balanced neuron solving a~c~ = a1c1+a2c2, a~d~ = a1d1+a2d2,
// a~^2 = c~^2 + d~^2. The result reproduces the pair's sum at every x outside
// the open interval between the two cusps, and a~^2 <= a1^2 + a2^2.
// Throws std::invalid_argument on a sign mismatch.
Neuron1D merge_pair(const Neuron1D& n1, const Neuron1D& n2);

// Appendix-style compressor: canonicalize, drop neurons dead on all data
// points, fold c = 0 constants into the output bias, then merge within cusp
// buckets until every interior gap holds at most 4 neurons (one per sign
// class) and each outer region at most 2. Output width is at most 4N, data
// outputs are preserved exactly up to roundoff, and the canonicalized
// parameter norm never increases. xs must be sorted ascending.
ShallowNet1D compress(const ShallowNet1D& net, std::span<const double> xs);

// CSV: one header line "a,c,d,b=<bias>" then one "a,c,d" row per neuron.
void write_net_csv(const ShallowNet1D& net, std::ostream& out);
ShallowNet1D read_net_csv(std::istream& in);

} // namespace reformnet
