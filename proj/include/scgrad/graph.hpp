#pragma once

// Stochastic computation graphs: a topologically ordered list of named nodes,
// each either a deterministic operator application or a draw from a primitive
// distribution family whose parameters come from parent nodes. A designated
// subset of the input nodes are the trainable parameters. The loss of a graph
// is the expected sum of its (scalar) leaf values.

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "scgrad/dist.hpp"
#include "scgrad/ops.hpp"
#include "scgrad/report.hpp"
#include "scgrad/tensor.hpp"

namespace scgrad {

using NodeId = std::string;

struct DetKind {
    std::string op;
    std::optional<Tensor> value;  // only for op == "const"

    bool operator==(const DetKind&) const = default;
};

struct StochKind {
    std::string family;
    std::vector<int> binding;  // parent index per family parameter, in family order

    bool operator==(const StochKind&) const = default;
};

struct Node {
    NodeId id;
    Shape shape;
    std::vector<NodeId> parents;
    std::variant<DetKind, StochKind> kind;

    bool is_stochastic() const { return std::holds_alternative<StochKind>(kind); }
    const DetKind* det() const { return std::get_if<DetKind>(&kind); }
    const StochKind* stoch() const { return std::get_if<StochKind>(&kind); }

    bool operator==(const Node&) const = default;
};

struct Scg {
    std::vector<Node> nodes;         // stored topological order
    std::vector<NodeId> params;      // designated parameter (input) nodes

    int index_of(const NodeId& id) const {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i].id == id) return static_cast<int>(i);
        }
        return -1;
    }

    const Node& node(const NodeId& id) const {
        const int i = index_of(id);
        if (i < 0) throw std::invalid_argument("Scg: no node '" + id + "'");
        return nodes[static_cast<std::size_t>(i)];
    }

    std::vector<int> child_counts() const {
        std::vector<int> counts(nodes.size(), 0);
        for (const Node& n : nodes) {
            for (const NodeId& p : n.parents) {
                const int i = index_of(p);
                if (i >= 0) ++counts[static_cast<std::size_t>(i)];
            }
        }
        return counts;
    }

    std::vector<std::size_t> leaf_indices() const {
        const auto counts = child_counts();
        std::vector<std::size_t> leaves;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (counts[i] == 0) leaves.push_back(i);
        }
        return leaves;
    }

    bool operator==(const Scg&) const = default;
};

using ParamAssignment = std::map<NodeId, Tensor>;

inline bool is_input(const Node& n) { return n.det() && n.det()->op == "input"; }
inline bool is_const(const Node& n) { return n.det() && n.det()->op == "const"; }

// ---------------------------------------------------------------------------
// Well-formedness: unique ids, order-respecting parent references, arity and
// shape consistency, scalar leaves, params naming input nodes. Violations are
// report entries, never exceptions.
// ---------------------------------------------------------------------------

inline CheckReport well_formed(const Scg& g, const Registry& reg = default_registry()) {
    CheckReport report("well_formed");

    std::map<NodeId, std::size_t> seen;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const Node& n = g.nodes[i];
        if (n.id.empty()) report.fail("#" + std::to_string(i), "empty node id");
        if (auto [it, inserted] = seen.emplace(n.id, i); !inserted) {
            report.fail(n.id, "duplicate node id");
        }
    }

    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const Node& n = g.nodes[i];
        std::vector<Shape> parent_shapes;
        bool parents_ok = true;
        for (const NodeId& p : n.parents) {
            auto it = seen.find(p);
            if (it == seen.end()) {
                report.fail(n.id, "parent '" + p + "' does not exist");
                parents_ok = false;
            } else if (it->second >= i) {
                report.fail(n.id, "parent '" + p + "' does not precede the node");
                parents_ok = false;
            } else {
                parent_shapes.push_back(g.nodes[it->second].shape);
            }
        }
        if (!parents_ok) continue;

        if (const DetKind* det = n.det()) {
            if (!reg.has_op(det->op)) {
                report.fail(n.id, "unknown operator '" + det->op + "'");
                continue;
            }
            if (det->op == "input") {
                if (!n.parents.empty()) report.fail(n.id, "input node cannot have parents");
                continue;
            }
            if (det->op == "const") {
                if (!n.parents.empty()) report.fail(n.id, "const node cannot have parents");
                if (!det->value) {
                    report.fail(n.id, "const node has no stored value");
                } else if (det->value->shape != n.shape) {
                    report.fail(n.id, "const value shape " + det->value->shape.to_string() +
                                          " != declared " + n.shape.to_string());
                }
                continue;
            }
            const OpDef& def = reg.op(det->op);
            if (static_cast<int>(n.parents.size()) != def.arity) {
                report.fail(n.id, "operator '" + det->op + "' expects " + std::to_string(def.arity) +
                                      " parents, got " + std::to_string(n.parents.size()));
                continue;
            }
            try {
                const Shape inferred = def.infer_shape(parent_shapes);
                if (inferred != n.shape) {
                    report.fail(n.id, "operator '" + det->op + "' produces shape " + inferred.to_string() +
                                          ", node declares " + n.shape.to_string());
                }
            } catch (const std::exception& e) {
                report.fail(n.id, e.what());
            }
        } else {
            const StochKind& st = *n.stoch();
            if (!reg.has_family(st.family)) {
                report.fail(n.id, "unknown distribution family '" + st.family + "'");
                continue;
            }
            const FamilyDef& fam = reg.family(st.family);
            if (st.binding.size() != fam.param_names.size()) {
                report.fail(n.id, "binding names " + std::to_string(st.binding.size()) + " parameters, family '" +
                                      st.family + "' has " + std::to_string(fam.param_names.size()));
                continue;
            }
            std::vector<bool> used(n.parents.size(), false);
            for (std::size_t k = 0; k < st.binding.size(); ++k) {
                const int b = st.binding[k];
                if (b < 0 || b >= static_cast<int>(n.parents.size())) {
                    report.fail(n.id, "binding for '" + fam.param_names[k] + "' references parent " +
                                          std::to_string(b) + " out of range");
                    continue;
                }
                used[static_cast<std::size_t>(b)] = true;
                if (parent_shapes[static_cast<std::size_t>(b)] != n.shape) {
                    report.fail(n.id, "distribution parameter '" + fam.param_names[k] + "' has shape " +
                                          parent_shapes[static_cast<std::size_t>(b)].to_string() +
                                          ", node declares " + n.shape.to_string());
                }
            }
            for (std::size_t p = 0; p < used.size(); ++p) {
                if (!used[p]) report.fail(n.id, "parent '" + n.parents[p] + "' is not bound to any parameter");
            }
            if (n.shape.rank() > 1) report.fail(n.id, "stochastic node rank must be <= 1");
        }
    }

    // Scalar leaves: loss sums the leaf values.
    const auto counts = g.child_counts();
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (counts[i] == 0 && !g.nodes[i].shape.is_scalar()) {
            report.fail(g.nodes[i].id, "leaf node has shape " + g.nodes[i].shape.to_string() + ", must be scalar");
        }
    }

    for (const NodeId& p : g.params) {
        const int i = g.index_of(p);
        if (i < 0) {
            report.fail(p, "parameter names a node that does not exist");
        } else if (!is_input(g.nodes[static_cast<std::size_t>(i)])) {
            report.fail(p, "parameter node is not an input node");
        }
    }

    return report;
}

// Sum of the values at the leaf nodes.
inline double cost(const Scg& g, const std::vector<Tensor>& xs) {
    if (xs.size() != g.nodes.size()) {
        throw std::invalid_argument("cost: expected " + std::to_string(g.nodes.size()) + " values, got " +
                                    std::to_string(xs.size()));
    }
    double acc = 0.0;
    for (std::size_t i : g.leaf_indices()) {
        if (!xs[i].shape.is_scalar()) {
            throw std::invalid_argument("cost: leaf '" + g.nodes[i].id + "' is not scalar");
        }
        acc += xs[i].value();
    }
    return acc;
}

namespace detail {

inline Tensor eval_det_node(const Scg& g, const Node& node, const ParamAssignment& theta,
                            const std::vector<Tensor>& values, const Registry& reg) {
    const DetKind& det = *node.det();
    if (det.op == "input") return theta.at(node.id);
    if (det.op == "const") return *det.value;
    std::vector<Tensor> args;
    args.reserve(node.parents.size());
    for (const NodeId& p : node.parents) {
        args.push_back(values[static_cast<std::size_t>(g.index_of(p))]);
    }
    return reg.op(det.op).forward(args);
}

inline std::vector<Tensor> gather_dist_params(const Scg& g, const Node& node,
                                              const std::vector<Tensor>& values) {
    const StochKind& st = *node.stoch();
    std::vector<Tensor> params;
    params.reserve(st.binding.size());
    for (int b : st.binding) {
        const NodeId& pid = node.parents[static_cast<std::size_t>(b)];
        params.push_back(values[static_cast<std::size_t>(g.index_of(pid))]);
    }
    return params;
}

// Holds copies of everything the lazily-built continuations need; the
// registry is borrowed and must outlive the returned Dist.
struct DistBuilder {
    std::shared_ptr<const Scg> graph;
    std::shared_ptr<const ParamAssignment> theta;
    const Registry* reg;

    Dist from(std::size_t i, std::vector<Tensor> values) const {
        if (i == graph->nodes.size()) return Dist::det(std::move(values));
        const Node& node = graph->nodes[i];
        const DistBuilder self = *this;
        if (node.is_stochastic()) {
            const StochKind& st = *node.stoch();
            PrimDist prim = reg->family(st.family).make(gather_dist_params(*graph, node, values));
            return Dist::compose(Dist::sample(std::move(prim)),
                                 [self, i, values](const std::vector<Tensor>& xs) {
                                     std::vector<Tensor> next = values;
                                     next.push_back(xs.at(0));
                                     return self.from(i + 1, std::move(next));
                                 });
        }
        Tensor v = eval_det_node(*graph, node, *theta, values, *reg);
        return Dist::compose(Dist::det({std::move(v)}),
                             [self, i, values](const std::vector<Tensor>& xs) {
                                 std::vector<Tensor> next = values;
                                 next.push_back(xs.at(0));
                                 return self.from(i + 1, std::move(next));
                             });
    }
};

}  // namespace detail

// Ancestral-sampling denotation: a distribution over the vector of all node
// values, built by folding compose over the stored topological order.
inline Dist to_dist(const Scg& g, const ParamAssignment& theta, const Registry& reg = default_registry()) {
    for (const Node& n : g.nodes) {
        if (!is_input(n)) continue;
        auto it = theta.find(n.id);
        if (it == theta.end()) {
            throw std::invalid_argument("to_dist: missing assignment for input node '" + n.id + "'");
        }
        if (it->second.shape != n.shape) {
            throw std::invalid_argument("to_dist: assignment for '" + n.id + "' has shape " +
                                        it->second.shape.to_string() + ", declared " + n.shape.to_string());
        }
    }
    detail::DistBuilder builder{std::make_shared<Scg>(g), std::make_shared<ParamAssignment>(theta), &reg};
    return builder.from(0, {});
}

// Convenience used by tests and the trainer: one ancestral sample.
inline std::pair<std::vector<Tensor>, Rng> sample_values(const Scg& g, const ParamAssignment& theta, Rng rng,
                                                         const Registry& reg = default_registry()) {
    return run(to_dist(g, theta, reg), rng);
}

}  // namespace scgrad
