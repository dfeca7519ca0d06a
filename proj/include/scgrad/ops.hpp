#pragma once

// Closed operator vocabulary. Every deterministic graph operator and every
// primitive-distribution family lives in a Registry entry carrying:
//
//   * forward evaluation and output-shape inference
//   * the reverse-mode pullback (vector-Jacobian product)
//   * differentiability / value-range / growth metadata consumed by the
//     precondition checker
//   * a domain-respecting input sampler for the finite-difference self-check
//
// register_pullback runs the finite-difference check once and rejects
// registrations that fail it; register_score runs the zero-mean quadrature
// check. The *_unchecked hooks exist solely for fault injection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scgrad/dist.hpp"
#include "scgrad/report.hpp"
#include "scgrad/rng.hpp"
#include "scgrad/tensor.hpp"

namespace scgrad {

inline double draw(Rng& rng) {
    auto [u, next] = rng.next();
    rng = next;
    return u;
}

inline double draw_uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * draw(rng); }

inline Tensor random_tensor(const Shape& shape, double lo, double hi, Rng& rng) {
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.data) v = draw_uniform(rng, lo, hi);
    return t;
}

// ---------------------------------------------------------------------------
// Value-range intervals (per node, hull over all components) and growth
// classes in the stochastic variates. Both are deliberately coarse; the
// precondition checker only needs conservative answers.
// ---------------------------------------------------------------------------

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool lo_open = false;
    bool hi_open = false;

    static Interval real_line() { return {}; }
    static Interval closed(double lo, double hi) { return {lo, hi, false, false}; }

    bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
    bool strictly_positive() const { return lo > 0.0 || (lo == 0.0 && lo_open); }
    bool inside_unit_open() const {
        return strictly_positive() && (hi < 1.0 || (hi == 1.0 && hi_open));
    }

    std::string to_string() const {
        auto num = [](double v) { return std::isfinite(v) ? std::to_string(v) : (v > 0 ? "inf" : "-inf"); };
        return std::string(lo_open ? "(" : "[") + num(lo) + ", " + num(hi) + (hi_open ? ")" : "]");
    }
};

namespace interval {

inline Interval hull(const Interval& a, const Interval& b) {
    Interval r;
    r.lo = std::min(a.lo, b.lo);
    r.hi = std::max(a.hi, b.hi);
    r.lo_open = (a.lo < b.lo) ? a.lo_open : (b.lo < a.lo ? b.lo_open : (a.lo_open && b.lo_open));
    r.hi_open = (a.hi > b.hi) ? a.hi_open : (b.hi > a.hi ? b.hi_open : (a.hi_open && b.hi_open));
    return r;
}

inline Interval add(const Interval& a, const Interval& b) {
    return {a.lo + b.lo, a.hi + b.hi, a.lo_open || b.lo_open, a.hi_open || b.hi_open};
}

inline Interval negate(const Interval& a) { return {-a.hi, -a.lo, a.hi_open, a.lo_open}; }

inline Interval sub(const Interval& a, const Interval& b) { return add(a, negate(b)); }

inline Interval mul(const Interval& a, const Interval& b) {
    // 0 * inf -> 0 is the right convention for range products.
    auto prod = [](double x, double y) { return (x == 0.0 || y == 0.0) ? 0.0 : x * y; };
    struct Cand { double v; bool open; };
    const Cand cands[4] = {
        {prod(a.lo, b.lo), a.lo_open || b.lo_open},
        {prod(a.lo, b.hi), a.lo_open || b.hi_open},
        {prod(a.hi, b.lo), a.hi_open || b.lo_open},
        {prod(a.hi, b.hi), a.hi_open || b.hi_open},
    };
    Interval r{cands[0].v, cands[0].v, cands[0].open, cands[0].open};
    for (const auto& c : cands) {
        if (c.v < r.lo || (c.v == r.lo && !c.open)) { r.lo = c.v; r.lo_open = c.open; }
        if (c.v > r.hi || (c.v == r.hi && !c.open)) { r.hi = c.v; r.hi_open = c.open; }
    }
    return r;
}

inline Interval scale(const Interval& a, double c) {
    if (c >= 0.0) return {a.lo * c, a.hi * c, a.lo_open, a.hi_open};
    return {a.hi * c, a.lo * c, a.hi_open, a.lo_open};
}

inline Interval of_tensor(const Tensor& t) {
    double lo = t.data[0], hi = t.data[0];
    for (double v : t.data) { lo = std::min(lo, v); hi = std::max(hi, v); }
    return Interval::closed(lo, hi);
}

template <class F>
Interval monotone(const Interval& a, F f) {
    return {f(a.lo), f(a.hi), a.lo_open, a.hi_open};
}

}  // namespace interval

// Growth of a node's value as a function of the stochastic variates, ordered
// by severity. Polynomial growth against Gaussian tails is the dominated-
// convergence sufficient condition; Unbounded fails the check.
enum class Growth { Constant = 0, Bounded = 1, Poly = 2, Unbounded = 3 };

inline Growth max_growth(const std::vector<Growth>& gs) {
    Growth m = Growth::Constant;
    for (Growth g : gs) m = std::max(m, g);
    return m;
}

// ---------------------------------------------------------------------------
// Registry entry types
// ---------------------------------------------------------------------------

using ForwardFn = std::function<Tensor(const std::vector<Tensor>&)>;
using PullbackFn = std::function<Tensor(const std::vector<Tensor>& inputs, const Tensor& output,
                                        const Tensor& adjoint, int input_index)>;
using ScoreFn = std::function<Tensor(const std::vector<Tensor>& params, const Tensor& value,
                                     int param_index)>;

struct OpDef {
    std::string name;
    int arity = 0;
    std::function<Shape(const std::vector<Shape>&)> infer_shape;
    ForwardFn forward;
    bool everywhere_differentiable = true;
    // Non-null for ops with a restricted domain: reports the violation when
    // the nondifferentiable/undefined set is reachable for the given ranges.
    std::function<std::optional<std::string>(const std::vector<Interval>&)> domain_check;
    std::function<Interval(const std::vector<Interval>&, const std::vector<Shape>&)> range;
    // Null means the default rule: Poly when every parent is at most Poly.
    std::function<Growth(const std::vector<Growth>&, const std::vector<Interval>&)> growth;
    std::function<std::vector<Tensor>(Rng&)> sample_inputs;
};

struct FamilyDef {
    std::string name;
    std::vector<std::string> param_names;
    std::function<PrimDist(const std::vector<Tensor>&)> make;
    std::function<std::optional<std::string>(const std::vector<Interval>&)> domain_check;
    std::vector<std::vector<Tensor>> score_check_params;  // fixtures for the zero-mean check
};

// ---------------------------------------------------------------------------
// Finite-difference pullback check
//
// For random domain-respecting inputs x, random directions v and a random
// adjoint a, compares sum_i <pullback_i(a), v_i> against the directional
// central difference <a, (f(x + h v) - f(x - h v)) / 2h>.
// ---------------------------------------------------------------------------

inline constexpr double kFdStep = 0x1.0p-17;  // ~7.6e-6, for O(1) inputs
inline constexpr double kPullbackTolerance = 1e-5;

namespace detail {

inline double dot(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
    return acc;
}

}  // namespace detail

inline CheckReport check_pullback(const OpDef& def, const PullbackFn& pullback, int trials,
                                  std::uint64_t seed, double tol = kPullbackTolerance) {
    CheckReport report("pullback-check:" + def.name);
    report.tolerance = tol;
    report.seed = seed;
    if (!def.sample_inputs) {
        report.fail(def.name, "operator has no input sampler; cannot grad-check");
        return report;
    }
    Rng rng = Rng::stream(seed, 0x900d);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const std::vector<Tensor> inputs = def.sample_inputs(rng);
        const Tensor output = def.forward(inputs);
        const Tensor adjoint = random_tensor(output.shape, -1.0, 1.0, rng);
        std::vector<Tensor> dirs;
        dirs.reserve(inputs.size());
        for (const auto& in : inputs) dirs.push_back(random_tensor(in.shape, -1.0, 1.0, rng));

        double lhs = 0.0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            const Tensor g = pullback(inputs, output, adjoint, static_cast<int>(i));
            if (g.shape != inputs[i].shape) {
                report.fail(def.name, "pullback for input " + std::to_string(i) + " returned shape " +
                                          g.shape.to_string() + ", expected " + inputs[i].shape.to_string());
                return report;
            }
            lhs += detail::dot(g, dirs[i]);
        }

        std::vector<Tensor> plus = inputs, minus = inputs;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            for (std::size_t k = 0; k < inputs[i].data.size(); ++k) {
                plus[i].data[k] += kFdStep * dirs[i].data[k];
                minus[i].data[k] -= kFdStep * dirs[i].data[k];
            }
        }
        const Tensor out_plus = def.forward(plus);
        const Tensor out_minus = def.forward(minus);
        Tensor fd = out_plus;
        for (std::size_t k = 0; k < fd.data.size(); ++k) {
            fd.data[k] = (out_plus.data[k] - out_minus.data[k]) / (2.0 * kFdStep);
        }
        const double rhs = detail::dot(adjoint, fd);
        const double rel = std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
        worst = std::max(worst, rel);
    }
    report.measured = worst;
    if (worst > tol) {
        report.fail(def.name, "max relative error " + std::to_string(worst) + " exceeds " + std::to_string(tol));
    }
    return report;
}

inline CheckReport check_score(const FamilyDef& family, const ScoreFn& score, double tol = 1e-8) {
    CheckReport report("score-check:" + family.name);
    report.tolerance = tol;
    double worst = 0.0;
    for (const auto& params : family.score_check_params) {
        const PrimDist prim = family.make(params);
        if (!prim.expectation_rule) {
            report.fail(family.name, "family has no expectation rule; cannot verify score");
            return report;
        }
        for (std::size_t k = 0; k < family.param_names.size(); ++k) {
            const auto grid = prim.expectation_rule();
            Tensor mean = Tensor::zeros(params[k].shape);
            for (const auto& [point, weight] : grid) {
                const Tensor s = score(params, point, static_cast<int>(k));
                for (std::size_t i = 0; i < mean.data.size(); ++i) mean.data[i] += weight * s.data[i];
            }
            for (std::size_t i = 0; i < mean.data.size(); ++i) {
                worst = std::max(worst, std::abs(mean.data[i]));
            }
        }
    }
    report.measured = worst;
    if (worst > tol) {
        report.fail(family.name, "score expectation " + std::to_string(worst) + " deviates from zero beyond " +
                                     std::to_string(tol));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

class Registry {
public:
    void add_op(OpDef def) {
        if (ops_.count(def.name)) throw std::invalid_argument("Registry: operator '" + def.name + "' already registered");
        ops_.emplace(def.name, std::move(def));
    }

    void add_family(FamilyDef def) {
        if (families_.count(def.name)) throw std::invalid_argument("Registry: family '" + def.name + "' already registered");
        families_.emplace(def.name, std::move(def));
    }

    // Runs the finite-difference self-check once; a failing candidate is rejected.
    void register_pullback(const std::string& op_name, PullbackFn pullback, int self_check_trials = 16,
                           std::uint64_t seed = 0) {
        const OpDef& def = op(op_name);
        if (pullbacks_.count(op_name)) {
            throw std::invalid_argument("Registry: pullback for '" + op_name + "' already registered");
        }
        const CheckReport check = check_pullback(def, pullback, self_check_trials, seed);
        if (!check.passed) {
            throw std::invalid_argument("Registry: pullback for '" + op_name +
                                        "' rejected by self-check: " + check.summary());
        }
        pullbacks_.emplace(op_name, std::move(pullback));
    }

    // Runs the zero-mean quadrature check once; a failing candidate is rejected.
    void register_score(const std::string& family_name, ScoreFn score) {
        const FamilyDef& def = family(family_name);
        if (scores_.count(family_name)) {
            throw std::invalid_argument("Registry: score for '" + family_name + "' already registered");
        }
        const CheckReport check = check_score(def, score);
        if (!check.passed) {
            throw std::invalid_argument("Registry: score for '" + family_name +
                                        "' rejected by self-check: " + check.summary());
        }
        scores_.emplace(family_name, std::move(score));
    }

    // Fault-injection hooks: bypass the self-checks on purpose.
    void replace_pullback_unchecked(const std::string& op_name, PullbackFn pullback) {
        op(op_name);
        pullbacks_[op_name] = std::move(pullback);
    }

    void replace_forward_unchecked(const std::string& op_name, ForwardFn forward) {
        ops_.at(op_name).forward = std::move(forward);
    }

    bool has_op(const std::string& name) const { return ops_.count(name) != 0; }

    const OpDef& op(const std::string& name) const {
        auto it = ops_.find(name);
        if (it == ops_.end()) throw std::invalid_argument("Registry: unknown operator '" + name + "'");
        return it->second;
    }

    bool has_pullback(const std::string& name) const { return pullbacks_.count(name) != 0; }

    const PullbackFn& pullback(const std::string& name) const {
        auto it = pullbacks_.find(name);
        if (it == pullbacks_.end()) throw std::invalid_argument("Registry: no pullback for '" + name + "'");
        return it->second;
    }

    bool has_family(const std::string& name) const { return families_.count(name) != 0; }

    const FamilyDef& family(const std::string& name) const {
        auto it = families_.find(name);
        if (it == families_.end()) throw std::invalid_argument("Registry: unknown family '" + name + "'");
        return it->second;
    }

    const ScoreFn& score(const std::string& family_name) const {
        auto it = scores_.find(family_name);
        if (it == scores_.end()) throw std::invalid_argument("Registry: no score for '" + family_name + "'");
        return it->second;
    }

    std::vector<std::string> pullback_op_names() const {
        std::vector<std::string> names;
        for (const auto& [name, pb] : pullbacks_) names.push_back(name);
        return names;
    }

private:
    std::map<std::string, OpDef> ops_;
    std::map<std::string, PullbackFn> pullbacks_;
    std::map<std::string, FamilyDef> families_;
    std::map<std::string, ScoreFn> scores_;
};

// Re-runs the registered pullback's finite-difference check, e.g. from the CLI.
inline CheckReport grad_check_op(const Registry& reg, const std::string& op_name, int trials = 100,
                                 std::uint64_t seed = 0, double tol = kPullbackTolerance) {
    return check_pullback(reg.op(op_name), reg.pullback(op_name), trials, seed, tol);
}

// ---------------------------------------------------------------------------
// Default vocabulary
// ---------------------------------------------------------------------------

namespace detail {

inline Shape same_shape1(const std::vector<Shape>& in) { return in.at(0); }

inline Shape broadcast2(const std::vector<Shape>& in) {
    const Shape& a = in.at(0);
    const Shape& b = in.at(1);
    if (a == b) return a;
    if (a.is_scalar()) return b;
    if (b.is_scalar()) return a;
    throw std::invalid_argument("shape mismatch " + a.to_string() + " vs " + b.to_string());
}

inline Shape equal_shapes(const std::vector<Shape>& in) {
    for (const Shape& s : in) {
        if (s != in[0]) throw std::invalid_argument("shape mismatch " + in[0].to_string() + " vs " + s.to_string());
    }
    return in.at(0);
}

inline Tensor reduce_to_shape(const Tensor& t, const Shape& target) {
    if (t.shape == target) return t;
    if (target.is_scalar()) return sum_all(t);
    throw std::invalid_argument("cannot reduce " + t.shape.to_string() + " to " + target.to_string());
}

inline Growth default_growth(const std::vector<Growth>& parents) {
    return max_growth(parents) <= Growth::Poly ? Growth::Poly : Growth::Unbounded;
}

inline std::vector<Tensor> sample_generic(Rng& rng, int arity, double lo, double hi, bool equal_only) {
    // Rotate through scalar / vector / matching shapes; binary ops also get
    // the scalar-with-vector pairing now and then.
    const int pick = static_cast<int>(draw_uniform(rng, 0.0, 3.0));
    Shape shape = (pick == 0) ? Shape{} : (pick == 1 ? Shape{3} : Shape{2, 2});
    std::vector<Tensor> inputs;
    for (int i = 0; i < arity; ++i) inputs.push_back(random_tensor(shape, lo, hi, rng));
    if (!equal_only && arity == 2 && pick != 0 && draw(rng) < 0.25) {
        inputs[static_cast<std::size_t>(draw(rng) < 0.5)] = random_tensor(Shape{}, lo, hi, rng);
    }
    return inputs;
}

inline double softplus_scalar(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

}  // namespace detail

// The corrected closed form of KL(N(mu, Diag sigma^2) || N(0, I)); the
// elementwise sum is -1/2 (1 + log sigma_i^2 - mu_i^2 - sigma_i^2).
inline double gauss_kl_stdnormal_value(const Tensor& mu, const Tensor& sigma) {
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.data.size(); ++i) {
        const double s2 = sigma.data[i] * sigma.data[i];
        if (!(s2 > 0.0)) throw std::domain_error("gauss_kl_stdnormal: sigma must be positive");
        acc += -0.5 * (1.0 + std::log(s2) - mu.data[i] * mu.data[i] - s2);
    }
    return acc;
}

inline Registry make_default_registry() {
    Registry reg;

    // --- value holders ---------------------------------------------------
    {
        OpDef input;
        input.name = "input";
        input.arity = 0;
        input.infer_shape = [](const std::vector<Shape>&) -> Shape {
            throw std::logic_error("input: shape comes from the declaration");
        };
        input.forward = [](const std::vector<Tensor>&) -> Tensor {
            throw std::logic_error("input: value comes from the assignment");
        };
        reg.add_op(std::move(input));

        OpDef konst = {};
        konst.name = "const";
        konst.arity = 0;
        konst.infer_shape = [](const std::vector<Shape>&) -> Shape {
            throw std::logic_error("const: shape comes from the stored value");
        };
        konst.forward = [](const std::vector<Tensor>&) -> Tensor {
            throw std::logic_error("const: value comes from the stored tensor");
        };
        reg.add_op(std::move(konst));
    }

    // --- unary elementwise -----------------------------------------------
    auto add_unary = [&](const std::string& name, Tensor (*fn)(const Tensor&),
                         std::function<Interval(const Interval&)> range1,
                         std::function<std::vector<Tensor>(Rng&)> sampler,
                         std::function<Growth(const std::vector<Growth>&, const std::vector<Interval>&)>
                             growth = nullptr) {
        OpDef def;
        def.name = name;
        def.arity = 1;
        def.infer_shape = detail::same_shape1;
        def.forward = [fn](const std::vector<Tensor>& in) { return fn(in.at(0)); };
        def.range = [range1](const std::vector<Interval>& in, const std::vector<Shape>&) {
            return range1(in.at(0));
        };
        def.growth = std::move(growth);
        def.sample_inputs = std::move(sampler);
        reg.add_op(std::move(def));
    };

    auto sample1 = [](Rng& rng) { return detail::sample_generic(rng, 1, -3.0, 3.0, true); };

    add_unary("softplus", &softplus, [](const Interval& a) {
        Interval r = interval::monotone(a, detail::softplus_scalar);
        if (!std::isfinite(a.lo)) { r.lo = 0.0; r.lo_open = true; }
        return r;
    }, sample1);

    add_unary("sigmoid", &sigmoid, [](const Interval& a) {
        Interval r = interval::monotone(a, sigmoid_scalar);
        if (!std::isfinite(a.lo)) { r.lo = 0.0; r.lo_open = true; }
        if (!std::isfinite(a.hi)) { r.hi = 1.0; r.hi_open = true; }
        return r;
    }, sample1);

    // exp over an unbounded range is not dominated by Gaussian tails; a
    // bounded range is already classified Bounded before this rule applies.
    add_unary("exp", &scgrad::exp, [](const Interval& a) {
        Interval r = interval::monotone(a, [](double v) { return std::exp(v); });
        if (!std::isfinite(a.lo)) { r.lo = 0.0; r.lo_open = true; }
        return r;
    }, sample1, [](const std::vector<Growth>&, const std::vector<Interval>&) { return Growth::Unbounded; });

    add_unary("neg", &neg, [](const Interval& a) { return interval::negate(a); }, sample1);

    add_unary("square", &square, [](const Interval& a) {
        const double m = std::max(std::abs(a.lo), std::abs(a.hi));
        Interval r;
        if (a.lo <= 0.0 && a.hi >= 0.0) {
            r = Interval{0.0, m * m, false, false};
        } else {
            const double lo = std::min(std::abs(a.lo), std::abs(a.hi));
            r = Interval{lo * lo, m * m, false, false};
        }
        if (!std::isfinite(m)) { r.hi = std::numeric_limits<double>::infinity(); }
        return r;
    }, sample1);

    {
        // log is undefined on (-inf, 0]; only a range bounded away from zero
        // keeps it inside the polynomial-growth class.
        OpDef def;
        def.name = "log";
        def.arity = 1;
        def.infer_shape = detail::same_shape1;
        def.forward = [](const std::vector<Tensor>& in) { return scgrad::log(in.at(0)); };
        def.everywhere_differentiable = false;
        def.domain_check = [](const std::vector<Interval>& in) -> std::optional<std::string> {
            if (!in.at(0).strictly_positive()) {
                return "log: argument range " + in.at(0).to_string() + " reaches nonpositive values";
            }
            return std::nullopt;
        };
        def.range = [](const std::vector<Interval>& in, const std::vector<Shape>&) {
            const Interval& a = in.at(0);
            Interval r;
            r.lo = a.lo > 0.0 ? std::log(a.lo) : -std::numeric_limits<double>::infinity();
            r.hi = std::isfinite(a.hi) && a.hi > 0.0 ? std::log(a.hi) : std::numeric_limits<double>::infinity();
            r.lo_open = a.lo_open;
            r.hi_open = a.hi_open;
            return r;
        };
        def.growth = [](const std::vector<Growth>& parents, const std::vector<Interval>& in) {
            return in.at(0).lo > 0.0 ? detail::default_growth(parents) : Growth::Unbounded;
        };
        def.sample_inputs = [](Rng& rng) { return detail::sample_generic(rng, 1, 0.2, 3.0, true); };
        reg.add_op(std::move(def));
    }

    // --- binary elementwise ----------------------------------------------
    auto sample2 = [](Rng& rng) { return detail::sample_generic(rng, 2, -3.0, 3.0, false); };

    auto add_binary = [&](const std::string& name, Tensor (*fn)(const Tensor&, const Tensor&),
                          std::function<Interval(const Interval&, const Interval&)> range2) {
        OpDef def;
        def.name = name;
        def.arity = 2;
        def.infer_shape = detail::broadcast2;
        def.forward = [fn](const std::vector<Tensor>& in) { return fn(in.at(0), in.at(1)); };
        def.range = [range2](const std::vector<Interval>& in, const std::vector<Shape>&) {
            return range2(in.at(0), in.at(1));
        };
        def.sample_inputs = sample2;
        reg.add_op(std::move(def));
    };

    add_binary("add", &add, interval::add);
    add_binary("sub", &sub, interval::sub);
    add_binary("mul", &mul, interval::mul);

    // --- linear algebra and reductions ------------------------------------
    {
        OpDef def;
        def.name = "matvec";
        def.arity = 2;
        def.infer_shape = [](const std::vector<Shape>& in) {
            const Shape& w = in.at(0);
            const Shape& x = in.at(1);
            if (!w.is_matrix() || !x.is_vector() || w.cols() != x.length()) {
                throw std::invalid_argument("matvec: incompatible shapes " + w.to_string() + " and " + x.to_string());
            }
            return Shape{w.rows()};
        };
        def.forward = [](const std::vector<Tensor>& in) { return matvec(in.at(0), in.at(1)); };
        def.range = [](const std::vector<Interval>& in, const std::vector<Shape>& shapes) {
            return interval::scale(interval::mul(in.at(0), in.at(1)), static_cast<double>(shapes.at(0).cols()));
        };
        def.sample_inputs = [](Rng& rng) {
            const auto rows = static_cast<std::int64_t>(2 + draw_uniform(rng, 0.0, 2.0));
            const auto cols = static_cast<std::int64_t>(2 + draw_uniform(rng, 0.0, 2.0));
            return std::vector<Tensor>{random_tensor(Shape{rows, cols}, -2.0, 2.0, rng),
                                       random_tensor(Shape{cols}, -2.0, 2.0, rng)};
        };
        reg.add_op(std::move(def));
    }

    {
        OpDef def;
        def.name = "sum_all";
        def.arity = 1;
        def.infer_shape = [](const std::vector<Shape>&) { return Shape{}; };
        def.forward = [](const std::vector<Tensor>& in) { return sum_all(in.at(0)); };
        def.range = [](const std::vector<Interval>& in, const std::vector<Shape>& shapes) {
            return interval::scale(in.at(0), static_cast<double>(shapes.at(0).numel()));
        };
        def.sample_inputs = sample1;
        reg.add_op(std::move(def));
    }

    // --- likelihood / divergence leaves ------------------------------------
    {
        // bce(target, prediction) = -sum_i [t_i log p_i + (1 - t_i) log(1 - p_i)]
        OpDef def;
        def.name = "bce";
        def.arity = 2;
        def.infer_shape = [](const std::vector<Shape>& in) {
            detail::equal_shapes(in);
            return Shape{};
        };
        def.forward = [](const std::vector<Tensor>& in) {
            const Tensor& target = in.at(0);
            const Tensor& pred = in.at(1);
            detail::require_same_shape(target, pred, "bce");
            double acc = 0.0;
            for (std::size_t i = 0; i < pred.data.size(); ++i) {
                const double p = pred.data[i];
                if (!(p > 0.0 && p < 1.0)) {
                    throw std::domain_error("bce: prediction " + std::to_string(p) + " outside (0,1)");
                }
                acc -= target.data[i] * std::log(p) + (1.0 - target.data[i]) * std::log1p(-p);
            }
            return Tensor::scalar(acc);
        };
        def.everywhere_differentiable = false;
        def.domain_check = [](const std::vector<Interval>& in) -> std::optional<std::string> {
            if (!in.at(1).inside_unit_open()) {
                return "bce: prediction range " + in.at(1).to_string() + " is not inside (0,1)";
            }
            return std::nullopt;
        };
        def.range = [](const std::vector<Interval>&, const std::vector<Shape>&) {
            return Interval{0.0, std::numeric_limits<double>::infinity(), false, false};
        };
        // Within this vocabulary a (0,1)-valued prediction with polynomially
        // growing preimage keeps -log p polynomially bounded (softplus of the
        // negated logit), so the default rule applies.
        def.sample_inputs = [](Rng& rng) {
            const int pick = static_cast<int>(draw_uniform(rng, 0.0, 2.0));
            const Shape shape = pick == 0 ? Shape{} : Shape{4};
            return std::vector<Tensor>{random_tensor(shape, 0.0, 1.0, rng),
                                       random_tensor(shape, 0.1, 0.9, rng)};
        };
        reg.add_op(std::move(def));
    }

    {
        // gauss_logpdf(x, mu, sigma) = sum_i log N(x_i; mu_i, sigma_i^2)
        OpDef def;
        def.name = "gauss_logpdf";
        def.arity = 3;
        def.infer_shape = [](const std::vector<Shape>& in) {
            detail::equal_shapes(in);
            if (in.at(0).rank() > 1) throw std::invalid_argument("gauss_logpdf: rank must be <= 1");
            return Shape{};
        };
        def.forward = [](const std::vector<Tensor>& in) {
            const Tensor& x = in.at(0);
            const Tensor& mu = in.at(1);
            const Tensor& sigma = in.at(2);
            double acc = 0.0;
            for (std::size_t i = 0; i < x.data.size(); ++i) {
                const double s = sigma.data[i];
                if (!(s > 0.0)) throw std::domain_error("gauss_logpdf: sigma must be positive");
                const double z = (x.data[i] - mu.data[i]) / s;
                acc += -0.5 * std::log(2.0 * std::numbers::pi) - std::log(s) - 0.5 * z * z;
            }
            return Tensor::scalar(acc);
        };
        def.everywhere_differentiable = false;
        def.domain_check = [](const std::vector<Interval>& in) -> std::optional<std::string> {
            if (!in.at(2).strictly_positive()) {
                return "gauss_logpdf: sigma range " + in.at(2).to_string() + " reaches nonpositive values";
            }
            return std::nullopt;
        };
        def.range = [](const std::vector<Interval>&, const std::vector<Shape>&) { return Interval::real_line(); };
        def.growth = [](const std::vector<Growth>& parents, const std::vector<Interval>&) {
            // Quadratic in x and mu; log sigma and 1/sigma^2 are only tame
            // when sigma does not depend on the stochastic choices.
            if (parents.at(2) != Growth::Constant) return Growth::Unbounded;
            return std::max(detail::default_growth({parents.at(0), parents.at(1)}), Growth::Poly);
        };
        def.sample_inputs = [](Rng& rng) {
            const int pick = static_cast<int>(draw_uniform(rng, 0.0, 2.0));
            const Shape shape = pick == 0 ? Shape{} : Shape{3};
            return std::vector<Tensor>{random_tensor(shape, -2.0, 2.0, rng),
                                       random_tensor(shape, -2.0, 2.0, rng),
                                       random_tensor(shape, 0.3, 2.0, rng)};
        };
        reg.add_op(std::move(def));
    }

    {
        OpDef def;
        def.name = "std_gauss_logpdf";
        def.arity = 1;
        def.infer_shape = [](const std::vector<Shape>& in) {
            if (in.at(0).rank() > 1) throw std::invalid_argument("std_gauss_logpdf: rank must be <= 1");
            return Shape{};
        };
        def.forward = [](const std::vector<Tensor>& in) {
            double acc = 0.0;
            for (double v : in.at(0).data) {
                acc += -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * v * v;
            }
            return Tensor::scalar(acc);
        };
        def.range = [](const std::vector<Interval>&, const std::vector<Shape>&) {
            return Interval{-std::numeric_limits<double>::infinity(), 0.0, false, false};
        };
        def.sample_inputs = sample1;
        reg.add_op(std::move(def));
    }

    {
        OpDef def;
        def.name = "gauss_kl_stdnormal";
        def.arity = 2;
        def.infer_shape = [](const std::vector<Shape>& in) {
            detail::equal_shapes(in);
            if (in.at(0).rank() > 1) throw std::invalid_argument("gauss_kl_stdnormal: rank must be <= 1");
            return Shape{};
        };
        def.forward = [](const std::vector<Tensor>& in) {
            return Tensor::scalar(gauss_kl_stdnormal_value(in.at(0), in.at(1)));
        };
        def.everywhere_differentiable = false;
        def.domain_check = [](const std::vector<Interval>& in) -> std::optional<std::string> {
            if (!in.at(1).strictly_positive()) {
                return "gauss_kl_stdnormal: sigma range " + in.at(1).to_string() + " reaches nonpositive values";
            }
            return std::nullopt;
        };
        def.range = [](const std::vector<Interval>&, const std::vector<Shape>&) {
            return Interval{0.0, std::numeric_limits<double>::infinity(), false, false};
        };
        def.growth = [](const std::vector<Growth>& parents, const std::vector<Interval>&) {
            return max_growth(parents) == Growth::Constant ? Growth::Constant : Growth::Unbounded;
        };
        def.sample_inputs = [](Rng& rng) {
            const int pick = static_cast<int>(draw_uniform(rng, 0.0, 2.0));
            const Shape shape = pick == 0 ? Shape{} : Shape{3};
            return std::vector<Tensor>{random_tensor(shape, -2.0, 2.0, rng),
                                       random_tensor(shape, 0.3, 2.0, rng)};
        };
        reg.add_op(std::move(def));
    }

    // --- families -----------------------------------------------------------
    {
        FamilyDef fam;
        fam.name = "gauss";
        fam.param_names = {"mu", "sigma"};
        fam.make = [](const std::vector<Tensor>& params) { return gauss(params.at(0), params.at(1)); };
        fam.domain_check = [](const std::vector<Interval>& in) -> std::optional<std::string> {
            if (!in.at(1).strictly_positive()) {
                return "gauss: sigma range " + in.at(1).to_string() + " reaches nonpositive values";
            }
            return std::nullopt;
        };
        fam.score_check_params = {
            {Tensor::scalar(0.0), Tensor::scalar(1.0)},
            {Tensor::scalar(1.3), Tensor::scalar(0.6)},
            {Tensor::vector({0.5, -0.2}), Tensor::vector({1.0, 2.0})},
        };
        reg.add_family(std::move(fam));
    }

    // --- pullbacks ----------------------------------------------------------
    using In = const std::vector<Tensor>&;
    auto pb = [&](const std::string& name, PullbackFn fn) { reg.register_pullback(name, std::move(fn)); };

    pb("softplus", [](In in, const Tensor&, const Tensor& adj, int) { return mul(adj, sigmoid(in.at(0))); });
    pb("sigmoid", [](In, const Tensor& out, const Tensor& adj, int) {
        return mul(adj, mul(out, sub(Tensor::ones(out.shape), out)));
    });
    pb("exp", [](In, const Tensor& out, const Tensor& adj, int) { return mul(adj, out); });
    pb("log", [](In in, const Tensor&, const Tensor& adj, int) {
        Tensor g = adj;
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] /= in.at(0).data[i];
        return g;
    });
    pb("neg", [](In, const Tensor&, const Tensor& adj, int) { return neg(adj); });
    pb("square", [](In in, const Tensor&, const Tensor& adj, int) {
        return mul(adj, scale(in.at(0), 2.0));
    });
    pb("add", [](In in, const Tensor&, const Tensor& adj, int index) {
        return detail::reduce_to_shape(adj, in.at(static_cast<std::size_t>(index)).shape);
    });
    pb("sub", [](In in, const Tensor&, const Tensor& adj, int index) {
        const Tensor signed_adj = index == 0 ? adj : neg(adj);
        return detail::reduce_to_shape(signed_adj, in.at(static_cast<std::size_t>(index)).shape);
    });
    pb("mul", [](In in, const Tensor&, const Tensor& adj, int index) {
        const Tensor& other = in.at(static_cast<std::size_t>(1 - index));
        return detail::reduce_to_shape(mul(adj, other), in.at(static_cast<std::size_t>(index)).shape);
    });
    pb("matvec", [](In in, const Tensor&, const Tensor& adj, int index) {
        if (index == 0) return outer(adj, in.at(1));
        return matvec_transpose(in.at(0), adj);
    });
    pb("sum_all", [](In in, const Tensor&, const Tensor& adj, int) {
        return Tensor::filled(in.at(0).shape, adj.value());
    });
    pb("bce", [](In in, const Tensor&, const Tensor& adj, int index) {
        const Tensor& target = in.at(0);
        const Tensor& pred = in.at(1);
        const double a = adj.value();
        Tensor g = Tensor::zeros(target.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            const double p = pred.data[i];
            if (index == 0) {
                g.data[i] = a * (std::log1p(-p) - std::log(p));
            } else {
                g.data[i] = a * (-target.data[i] / p + (1.0 - target.data[i]) / (1.0 - p));
            }
        }
        return g;
    });
    pb("gauss_logpdf", [](In in, const Tensor&, const Tensor& adj, int index) {
        const Tensor& x = in.at(0);
        const Tensor& mu = in.at(1);
        const Tensor& sigma = in.at(2);
        const double a = adj.value();
        Tensor g = Tensor::zeros(x.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            const double s = sigma.data[i];
            const double d = x.data[i] - mu.data[i];
            if (index == 0) g.data[i] = a * (-d / (s * s));
            if (index == 1) g.data[i] = a * (d / (s * s));
            if (index == 2) g.data[i] = a * (d * d / (s * s * s) - 1.0 / s);
        }
        return g;
    });
    pb("std_gauss_logpdf", [](In in, const Tensor&, const Tensor& adj, int) {
        return scale(in.at(0), -adj.value());
    });
    pb("gauss_kl_stdnormal", [](In in, const Tensor&, const Tensor& adj, int index) {
        const Tensor& mu = in.at(0);
        const Tensor& sigma = in.at(1);
        const double a = adj.value();
        Tensor g = Tensor::zeros(mu.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            g.data[i] = index == 0 ? a * mu.data[i] : a * (sigma.data[i] - 1.0 / sigma.data[i]);
        }
        return g;
    });

    // --- scores --------------------------------------------------------------
    reg.register_score("gauss", [](In params, const Tensor& value, int param_index) {
        const Tensor& mu = params.at(0);
        const Tensor& sigma = params.at(1);
        Tensor g = Tensor::zeros(mu.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            const double s = sigma.data[i];
            const double d = value.data[i] - mu.data[i];
            g.data[i] = param_index == 0 ? d / (s * s) : d * d / (s * s * s) - 1.0 / s;
        }
        return g;
    });

    return reg;
}

inline const Registry& default_registry() {
    static const Registry reg = make_default_registry();
    return reg;
}

}  // namespace scgrad
