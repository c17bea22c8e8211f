#include "reformnet/compress1d.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace reformnet {

namespace {

double relu(double x) { return x > 0.0 ? x : 0.0; }

int sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

} // namespace

bool Neuron1D::balanced(double tol) const {
    return std::abs(a * a - c * c - d * d) <= tol * (a * a + c * c + d * d);
}

double ShallowNet1D::operator()(double x) const {
    double value = bias;
    for (const Neuron1D& n : neurons) value += n.a * relu(n.c * x + n.d);
    return value;
}

double ShallowNet1D::parameter_norm() const {
    double s = 0.0;
    for (const Neuron1D& n : neurons) s += n.a * n.a + n.c * n.c + n.d * n.d;
    return s;
}

ShallowNet1D canonicalize(const ShallowNet1D& net) {
    ShallowNet1D out;
    out.bias = net.bias;
    for (const Neuron1D& n : net.neurons) {
        const double incoming = std::hypot(n.c, n.d);
        if (n.a == 0.0 || incoming == 0.0) continue; // zero function
        // a*relu(cx+d) = (a t) relu((c/t)x + d/t) for t > 0; pick t so that
        // (at)^2 = (c/t)^2 + (d/t)^2, which also minimizes the norm (AM-GM).
        const double t = std::sqrt(incoming / std::abs(n.a));
        out.neurons.push_back({n.a * t, n.c / t, n.d / t});
    }
    return out;
}

std::optional<double> cusp(const Neuron1D& neuron) {
    if (neuron.c == 0.0) return std::nullopt;
    return -neuron.d / neuron.c;
}

Neuron1D merge_pair(const Neuron1D& n1, const Neuron1D& n2) {
    if (sign_of(n1.a) == 0 || sign_of(n1.a) != sign_of(n2.a))
        throw std::invalid_argument("merge_pair requires matching sign(a)");
    if (sign_of(n1.c) == 0 || sign_of(n1.c) != sign_of(n2.c))
        throw std::invalid_argument("merge_pair requires matching sign(c)");
    const double p = n1.a * n1.c + n2.a * n2.c;
    const double q = n1.a * n1.d + n2.a * n2.d;
    // a~^4 = (a~c~)^2 + (a~d~)^2 = p^2 + q^2, with sign(a~) = sign(a1)
    const double magnitude = std::pow(p * p + q * q, 0.25);
    const double a = sign_of(n1.a) * magnitude;
    return {a, p / a, q / a};
}

namespace {

bool dead_on_data(const Neuron1D& n, std::span<const double> xs) {
    for (double x : xs)
        if (n.c * x + n.d > 0.0) return false;
    return true;
}

// Gap index for a cusp among sorted data points: 0 is the outer-left region
// (cusp <= x_0), i in [1, N-1] the half-open interval (x_{i-1}, x_i], and N
// the outer-right region (cusp > x_{N-1}). Cusps exactly at a data point go
// to the gap on their left.
size_t gap_index(double cusp_value, std::span<const double> xs) {
    size_t i = 0;
    while (i < xs.size() && cusp_value > xs[i]) ++i;
    return i;
}

// Merge within one bucket until at most `limit` neurons remain. Pigeonhole
// over the sign classes (sign a, sign c) guarantees a mergeable pair as long
// as the bucket exceeds the number of classes present.
void reduce_bucket(std::vector<Neuron1D>& bucket, size_t limit) {
    while (bucket.size() > limit) {
        // group by sign class, pick the largest
        int best_first = -1, best_second = -1;
        size_t best_count = 0;
        for (int sa : {-1, 1}) {
            for (int sc : {-1, 1}) {
                int first = -1, second = -1;
                size_t count = 0;
                for (size_t i = 0; i < bucket.size(); ++i) {
                    if (sign_of(bucket[i].a) == sa && sign_of(bucket[i].c) == sc) {
                        ++count;
                        if (first < 0) first = static_cast<int>(i);
                        else if (second < 0) second = static_cast<int>(i);
                    }
                }
                if (count > best_count && second >= 0) {
                    best_count = count;
                    best_first = first;
                    best_second = second;
                }
            }
        }
        if (best_second < 0) break; // every class is a singleton
        bucket[best_first] = merge_pair(bucket[best_first], bucket[best_second]);
        bucket.erase(bucket.begin() + best_second);
    }
}

} // namespace

ShallowNet1D compress(const ShallowNet1D& net, std::span<const double> xs) {
    ShallowNet1D canon = canonicalize(net);
    ShallowNet1D out;
    out.bias = canon.bias;
    if (xs.empty()) return out; // every neuron is vacuously dead on data

    const size_t num_buckets = xs.size() + 1;
    std::vector<std::vector<Neuron1D>> buckets(num_buckets);
    for (const Neuron1D& n : canon.neurons) {
        const auto kink = cusp(n);
        if (!kink) {
            // constant neuron: a*relu(d) folds into the output bias
            out.bias += n.a * relu(n.d);
            continue;
        }
        if (dead_on_data(n, xs)) continue;
        buckets[gap_index(*kink, xs)].push_back(n);
    }

    // Outer regions hold only fully-active neurons (the dead ones were
    // dropped), so two sign classes remain and they reduce to <= 2; interior
    // gaps reduce to <= 4.
    for (size_t i = 0; i < num_buckets; ++i) {
        const bool outer = (i == 0) || (i == num_buckets - 1);
        reduce_bucket(buckets[i], outer ? 2 : 4);
        out.neurons.insert(out.neurons.end(), buckets[i].begin(), buckets[i].end());
    }
    return out;
}

void write_net_csv(const ShallowNet1D& net, std::ostream& out) {
    out.precision(17);
    out << "a,c,d,b=" << net.bias << '\n';
    for (const Neuron1D& n : net.neurons)
        out << n.a << ',' << n.c << ',' << n.d << '\n';
}

ShallowNet1D read_net_csv(std::istream& in) {
    ShallowNet1D net;
    std::string line;
    if (!std::getline(in, line))
        throw InvalidInputError("empty 1d-net file");
    const auto marker = line.find("b=");
    if (marker == std::string::npos)
        throw InvalidInputError("1d-net header must carry b=<bias>");
    net.bias = std::stod(line.substr(marker + 2));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        Neuron1D n;
        char comma = 0;
        if (!(row >> n.a >> comma >> n.c >> comma >> n.d))
            throw InvalidInputError("malformed 1d-net row: " + line);
        net.neurons.push_back(n);
    }
    return net;
}

} // namespace reformnet
