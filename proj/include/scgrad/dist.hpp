#pragma once

// Probability distributions over vectors of tensors, as an inductive value
// with two denotations that are kept in correspondence by the test harness:
//
//   run(d, rng)  -- procedural: threads an explicit Rng and produces values
//   expect(d, f) -- mathematical: the expectation functional, realized by a
//                   Gauss-Hermite quadrature oracle (verification use only;
//                   tensor-product grids limit it to a few scalar variates)
//
// Constructors: det (return a value), sample (draw from a primitive),
// compose (sequence, the monadic bind).

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scgrad/quadrature.hpp"
#include "scgrad/rng.hpp"
#include "scgrad/tensor.hpp"

namespace scgrad {

// Oracle refusal (unregistered primitive, dimension budget): not a numerical
// failure, a statement that the exact route is unavailable.
struct OracleUnavailable : std::runtime_error {
    explicit OracleUnavailable(const std::string& why) : std::runtime_error(why) {}
};

enum class Support { RealLine, Positive, UnitInterval };

// A primitive continuous distribution: density plus sampling procedure, and
// (when registered) a finite expectation rule sum_k w_k f(x_k) ~= E[f].
struct PrimDist {
    std::string family;
    Shape shape;  // variate shape, rank <= 1
    Support support = Support::RealLine;
    std::function<double(const Tensor&)> pdf;
    std::function<std::pair<Tensor, Rng>(Rng)> sampler;
    std::function<std::vector<std::pair<Tensor, double>>()> expectation_rule;  // empty: no oracle
};

// Elementwise-independent Gaussian. The sampler is Box-Muller: every pair of
// variates consumes exactly two uniforms; an odd final variate still consumes
// both and discards the sine branch, so replay counts are exact.
inline PrimDist gauss(const Tensor& mu, const Tensor& sigma) {
    if (mu.shape != sigma.shape) {
        throw std::invalid_argument("gauss: mu shape " + mu.shape.to_string() + " != sigma shape " +
                                    sigma.shape.to_string());
    }
    if (mu.shape.rank() > 1) {
        throw std::invalid_argument("gauss: variate rank must be <= 1, got " + mu.shape.to_string());
    }
    for (double s : sigma.data) {
        if (!(s > 0.0)) throw std::domain_error("gauss: sigma entry " + std::to_string(s) + " is not positive");
    }

    PrimDist p;
    p.family = "gauss";
    p.shape = mu.shape;
    p.support = Support::RealLine;

    p.pdf = [mu, sigma](const Tensor& x) {
        if (x.shape != mu.shape) {
            throw std::invalid_argument("gauss pdf: value shape " + x.shape.to_string() + " != " +
                                        mu.shape.to_string());
        }
        double density = 1.0;
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            const double z = (x.data[i] - mu.data[i]) / sigma.data[i];
            density *= std::exp(-0.5 * z * z) / (sigma.data[i] * std::sqrt(2.0 * std::numbers::pi));
        }
        return density;
    };

    p.sampler = [mu, sigma](Rng rng) {
        const auto n = static_cast<std::size_t>(mu.shape.numel());
        std::vector<double> out(n, 0.0);
        for (std::size_t i = 0; i < n; i += 2) {
            auto [u1, r1] = rng.next();
            auto [u2, r2] = r1.next();
            rng = r2;
            const double radius = std::sqrt(-2.0 * std::log(std::max(u1, 0x1.0p-64)));
            const double angle = 2.0 * std::numbers::pi * u2;
            out[i] = mu.data[i] + sigma.data[i] * radius * std::cos(angle);
            if (i + 1 < n) out[i + 1] = mu.data[i + 1] + sigma.data[i + 1] * radius * std::sin(angle);
        }
        return std::make_pair(Tensor(mu.shape, std::move(out)), rng);
    };

    p.expectation_rule = [mu, sigma]() {
        const QuadRule& gh = gauss_hermite(kGaussHermiteOrder);
        const auto n = static_cast<std::size_t>(mu.shape.numel());
        const double norm = std::pow(std::numbers::pi, -0.5 * static_cast<double>(n));
        std::vector<std::pair<Tensor, double>> grid;
        std::vector<std::size_t> idx(n, 0);
        while (true) {
            Tensor point = mu;
            double weight = norm;
            for (std::size_t i = 0; i < n; ++i) {
                point.data[i] = mu.data[i] + std::numbers::sqrt2 * sigma.data[i] * gh.nodes[idx[i]];
                weight *= gh.weights[idx[i]];
            }
            grid.emplace_back(std::move(point), weight);
            std::size_t k = 0;
            while (k < n && ++idx[k] == gh.nodes.size()) idx[k++] = 0;
            if (k == n) break;
        }
        return grid;
    };

    return p;
}

class Dist {
public:
    enum class Kind { Det, Sample, Compose };
    using Continuation = std::function<Dist(const std::vector<Tensor>&)>;

    static Dist det(std::vector<Tensor> values) {
        Dist d;
        d.kind_ = Kind::Det;
        d.value_ = std::move(values);
        return d;
    }

    static Dist sample(PrimDist prim) {
        Dist d;
        d.kind_ = Kind::Sample;
        d.prim_ = std::make_shared<PrimDist>(std::move(prim));
        return d;
    }

    static Dist compose(Dist first, Continuation rest) {
        Dist d;
        d.kind_ = Kind::Compose;
        d.first_ = std::make_shared<Dist>(std::move(first));
        d.rest_ = std::move(rest);
        return d;
    }

    Kind kind() const { return kind_; }
    const std::vector<Tensor>& value() const { return value_; }
    const PrimDist& prim() const { return *prim_; }
    const Dist& first() const { return *first_; }
    const Continuation& rest() const { return rest_; }

private:
    Dist() = default;
    Kind kind_ = Kind::Det;
    std::vector<Tensor> value_;
    std::shared_ptr<PrimDist> prim_;
    std::shared_ptr<Dist> first_;
    Continuation rest_;
};

inline std::pair<std::vector<Tensor>, Rng> run(const Dist& d, Rng rng) {
    switch (d.kind()) {
        case Dist::Kind::Det:
            return {d.value(), rng};
        case Dist::Kind::Sample: {
            auto [x, next] = d.prim().sampler(rng);
            return {std::vector<Tensor>{std::move(x)}, next};
        }
        case Dist::Kind::Compose: {
            auto [x, mid] = run(d.first(), rng);
            return run(d.rest()(x), mid);
        }
    }
    throw std::logic_error("run: unreachable");
}

namespace detail {

// f receives the produced values plus the quadrature dimensions still
// available downstream of them.
inline std::vector<double> expect_rec(
    const Dist& d, const std::function<std::vector<double>(const std::vector<Tensor>&, int)>& f,
    int remaining) {
    switch (d.kind()) {
        case Dist::Kind::Det:
            return f(d.value(), remaining);
        case Dist::Kind::Sample: {
            const PrimDist& p = d.prim();
            if (!p.expectation_rule) {
                throw OracleUnavailable("expect: no expectation rule registered for family '" + p.family + "'");
            }
            const int dims = static_cast<int>(p.shape.numel());
            if (dims > remaining) {
                throw OracleUnavailable("expect: quadrature dimension budget exceeded (needs " +
                                        std::to_string(dims) + " more)");
            }
            std::vector<double> acc;
            for (const auto& [point, weight] : p.expectation_rule()) {
                const std::vector<double> v = f({point}, remaining - dims);
                if (acc.empty()) acc.assign(v.size(), 0.0);
                for (std::size_t i = 0; i < v.size(); ++i) acc[i] += weight * v[i];
            }
            return acc;
        }
        case Dist::Kind::Compose:
            return expect_rec(
                d.first(),
                [&](const std::vector<Tensor>& xs, int rem) {
                    return expect_rec(d.rest()(xs), f, rem);
                },
                remaining);
    }
    throw std::logic_error("expect: unreachable");
}

}  // namespace detail

inline constexpr int kQuadratureBudget = 3;  // scalar Gaussian variates

// Vector-valued expectation, one quadrature sweep for all components.
inline std::vector<double> expect_each(const Dist& d,
                                       const std::function<std::vector<double>(const std::vector<Tensor>&)>& f,
                                       int max_dims = kQuadratureBudget) {
    return detail::expect_rec(
        d, [&](const std::vector<Tensor>& xs, int) { return f(xs); }, max_dims);
}

inline double expect(const Dist& d, const std::function<double(const std::vector<Tensor>&)>& f,
                     int max_dims = kQuadratureBudget) {
    const auto v = expect_each(
        d, [&](const std::vector<Tensor>& xs) { return std::vector<double>{f(xs)}; }, max_dims);
    return v.at(0);
}

// integral of the density over its support via composite Simpson, for the
// normalization check. Scalar variates only.
inline double pdf_mass(const PrimDist& p, int intervals = 200000) {
    if (p.shape.numel() != 1) {
        throw std::invalid_argument("pdf_mass: scalar variates only");
    }
    double lo = 0.0, hi = 0.0;
    switch (p.support) {
        case Support::RealLine: lo = -40.0; hi = 40.0; break;
        case Support::Positive: lo = 1e-12; hi = 80.0; break;
        case Support::UnitInterval: lo = 0.0; hi = 1.0; break;
    }
    return simpson([&](double x) { return p.pdf(Tensor(p.shape, {x})); }, lo, hi, intervals);
}

}  // namespace scgrad
