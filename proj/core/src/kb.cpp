#include "bp/kb.hpp"

#include "bp/dsl.hpp"

#include <algorithm>
#include <sstream>

namespace bp {

bool GroundAction::operator<(const GroundAction& o) const {
    if (action != o.action) return action < o.action;
    if (ctrl != o.ctrl) return ctrl < o.ctrl;
    return unctrl < o.unctrl;
}

namespace {

bool compare(CmpOp op, const Rational& a, const Rational& b) {
    switch (op) {
        case CmpOp::Eq: return a == b;
        case CmpOp::Ne: return a != b;
        case CmpOp::Lt: return a < b;
        case CmpOp::Le: return a <= b;
        case CmpOp::Gt: return a > b;
        case CmpOp::Ge: return a >= b;
    }
    return false;
}

Rational arith(Term::Kind kind, const Rational& a, const Rational& b) {
    switch (kind) {
        case Term::Kind::Add: return a + b;
        case Term::Kind::Sub: return a - b;
        case Term::Kind::Mul: return a * b;
        case Term::Kind::Div:
            if (b == 0) throw EvalError(errc::kDivByZero, "division by zero");
            return a / b;
        default: return 0;
    }
}

// Generic boolean evaluator over an atom evaluator.
template <class AtomFn>
bool eval_bool(const FormulaPtr& f, const AtomFn& atom) {
    switch (f->kind) {
        case Formula::Kind::True: return true;
        case Formula::Kind::False: return false;
        case Formula::Kind::Cmp: return atom(*f);
        case Formula::Kind::Not: return !eval_bool(f->args[0], atom);
        case Formula::Kind::And:
            for (const auto& a : f->args)
                if (!eval_bool(a, atom)) return false;
            return true;
        case Formula::Kind::Or:
            for (const auto& a : f->args)
                if (eval_bool(a, atom)) return true;
            return false;
    }
    return false;
}

}  // namespace

Rational eval_term(const TermPtr& t, const World& w, const std::vector<Rational>& args) {
    switch (t->kind) {
        case Term::Kind::Const: return t->value;
        case Term::Kind::Fluent:
            if (t->index >= w.size()) throw EvalError(errc::kNotObjective, "fluent '" + t->name + "' out of range");
            return w[t->index];
        case Term::Kind::Param:
            if (t->index >= args.size()) throw EvalError(errc::kNotObjective, "unbound parameter '" + t->name + "'");
            return args[t->index];
        case Term::Kind::Add:
        case Term::Kind::Sub:
        case Term::Kind::Mul:
        case Term::Kind::Div:
            return arith(t->kind, eval_term(t->args[0], w, args), eval_term(t->args[1], w, args));
        case Term::Kind::Neg: return -eval_term(t->args[0], w, args);
        case Term::Kind::Cases:
            for (std::size_t i = 0; i < t->guards.size(); ++i)
                if (eval_fluent_formula(t->guards[i], w, args)) return eval_term(t->args[i], w, args);
            return eval_term(t->args.back(), w, args);
        default: throw EvalError(errc::kNotObjective, "belief operator in an objective term");
    }
}

bool eval_fluent_formula(const FormulaPtr& f, const World& w, const std::vector<Rational>& args) {
    return eval_bool(f, [&](const Formula& c) { return compare(c.op, eval_term(c.lhs, w, args), eval_term(c.rhs, w, args)); });
}

World progress_world(const ModelFile& m, const World& w, const GroundAction& a, const BasicActionTheory& bat) {
    World out = w;
    if (a.action == m.eps_action()) {
        out[m.final_fluent()] = 1;
        return out;
    }
    if (a.action == m.abort_action()) {
        out[m.fail_fluent()] = 1;
        return out;
    }
    std::vector<Rational> args = a.ctrl;
    args.insert(args.end(), a.unctrl.begin(), a.unctrl.end());
    for (FluentId f = 0; f < m.state_fluent_count(); ++f) {
        for (const auto& c : bat.ssa[f]) {
            if (c.action == a.action) {
                out[f] = eval_term(c.effect, w, args);
                break;
            }
        }
    }
    return out;
}

std::size_t active_context(const ModelFile& m, ActionId action, const std::vector<Rational>& ctrl, const World& w,
                           const BasicActionTheory& bat) {
    const auto& rows = bat.likelihood[action].rows;
    std::optional<std::size_t> hit;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!eval_fluent_formula(rows[i].context.root, w, ctrl)) continue;
        if (hit)
            throw EvalError(errc::kContextOverlap, "contexts " + std::to_string(*hit + 1) + " and " +
                                                       std::to_string(i + 1) + " of '" + m.actions[action].name +
                                                       "' both hold at " + render_world(m, w));
        hit = i;
    }
    if (!hit)
        throw EvalError(errc::kContextGap,
                        "no likelihood context of '" + m.actions[action].name + "' holds at " + render_world(m, w));
    return *hit;
}

Rational action_likelihood(const ModelFile& m, const GroundAction& a, const World& w, const BasicActionTheory& bat) {
    if (m.actions[a.action].reserved()) return 1;
    const ActionDecl& decl = m.actions[a.action];
    std::size_t row_index = active_context(m, a.action, a.ctrl, w, bat);
    const LikelihoodRow& row = bat.likelihood[a.action].rows[row_index];
    Rational sum = 0;
    Rational result = 0;
    for (std::size_t j = 0; j < decl.outcomes.size(); ++j) {
        Rational c = eval_term(row.weights[j], w, a.ctrl);
        if (c < 0 || c > 1)
            throw EvalError(errc::kWeightRange, "weight " + to_string(c) + " of '" + decl.name + "' outside [0,1]");
        sum += c;
        bool match = true;
        for (std::size_t i = 0; i < decl.outcomes[j].size() && match; ++i)
            match = eval_term(decl.outcomes[j][i], w, a.ctrl) == a.unctrl[i];
        // Outcomes evaluating to the same tuple denote one ground action.
        if (match) result += c;
    }
    if (sum != 1)
        throw EvalError(errc::kRowSum, "likelihood row " + std::to_string(row_index + 1) + " of '" + decl.name +
                                           "' sums to " + to_string(sum));
    return result;
}

std::vector<GroundAction> oi_alternatives(const ModelFile& m, const PrimitiveProgram& rho) {
    const ActionDecl& decl = m.actions[rho.action];
    if (decl.reserved()) return {GroundAction{rho.action, {}, {}}};
    std::vector<GroundAction> out;
    for (const auto& outcome : decl.outcomes) {
        GroundAction g{rho.action, rho.ctrl, {}};
        for (const auto& r : outcome) g.unctrl.push_back(eval_term(r, World{}, rho.ctrl));
        if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(std::move(g));
    }
    return out;
}

std::vector<GroundAction> oi_alternatives(const ModelFile& m, const GroundAction& t) {
    return oi_alternatives(m, suppress_outcome(t));
}

PrimitiveProgram suppress_outcome(const GroundAction& t) {
    return PrimitiveProgram{t.action, t.ctrl};
}

GroundAction eps_action(const ModelFile& m) {
    return GroundAction{m.eps_action(), {}, {}};
}

GroundAction abort_action(const ModelFile& m) {
    return GroundAction{m.abort_action(), {}, {}};
}

KnowledgeBase initial_kb(const ModelFile& m) {
    KnowledgeBase kb;
    for (const auto& [v, p] : m.kb0) {
        if (p == 0) continue;
        World w = v;
        w.resize(m.fluents.size(), Rational(0));
        kb.dist[w] += p;
    }
    return kb;
}

namespace {

KnowledgeBase normalize_or_throw(const ModelFile& m, BeliefDistribution next, const Rational& total,
                                 const GroundAction& t, bool renormalize) {
    if (total == 0)
        throw EvalError(errc::kIncompatible, "belief is incompatible with " + print_ground_action(m, t));
    KnowledgeBase out;
    if (renormalize) {
        for (auto& [w, p] : next) p /= total;
    } else if (total != 1) {
        throw EvalError(errc::kMassLoss, "progression by " + print_ground_action(m, t) + " lost mass (total " +
                                             to_string(total) + ")");
    }
    out.dist = std::move(next);
    return out;
}

}  // namespace

KnowledgeBase progress_kb_stochastic(const ModelFile& m, const KnowledgeBase& kb, const GroundAction& t) {
    const auto alts = oi_alternatives(m, t);
    BeliefDistribution next;
    Rational total = 0;
    for (const auto& [u, p] : kb.dist) {
        for (const auto& a : alts) {
            Rational l = action_likelihood(m, a, u, m.believed_bat);
            if (l == 0) continue;
            Rational mass = p * l;
            next[progress_world(m, u, a, m.believed_bat)] += mass;
            total += mass;
        }
    }
    return normalize_or_throw(m, std::move(next), total, t, false);
}

KnowledgeBase progress_kb_sensing(const ModelFile& m, const KnowledgeBase& kb, const GroundAction& t) {
    BeliefDistribution next;
    Rational eta = 0;
    for (const auto& [u, p] : kb.dist) {
        Rational l = action_likelihood(m, t, u, m.believed_bat);
        if (l == 0) continue;
        Rational mass = p * l;
        next.emplace(u, mass);
        eta += mass;
    }
    return normalize_or_throw(m, std::move(next), eta, t, true);
}

KnowledgeBase progress_kb(const ModelFile& m, const KnowledgeBase& kb, const GroundAction& t) {
    const ActionDecl& decl = m.actions[t.action];
    if (decl.reserved()) {
        KnowledgeBase out;
        for (const auto& [u, p] : kb.dist) out.dist[progress_world(m, u, t, m.believed_bat)] += p;
        return out;
    }
    if (decl.kind == ActionDecl::Kind::Sensing) return progress_kb_sensing(m, kb, t);
    return progress_kb_stochastic(m, kb, t);
}

std::optional<KnowledgeBase> try_progress_kb(const ModelFile& m, const KnowledgeBase& kb, const GroundAction& t) {
    try {
        return progress_kb(m, kb, t);
    } catch (const EvalError& e) {
        if (e.code() == errc::kIncompatible) return std::nullopt;
        throw;
    }
}

Rational eval_belief_term(const TermPtr& t, const KnowledgeBase& kb) {
    auto bel = [&](const auto& holds) {
        Rational s = 0;
        for (const auto& [u, p] : kb.dist)
            if (holds(u)) s += p;
        return s;
    };
    switch (t->kind) {
        case Term::Kind::Const: return t->value;
        case Term::Kind::Add:
        case Term::Kind::Sub:
        case Term::Kind::Mul:
        case Term::Kind::Div:
            return arith(t->kind, eval_belief_term(t->args[0], kb), eval_belief_term(t->args[1], kb));
        case Term::Kind::Neg: return -eval_belief_term(t->args[0], kb);
        case Term::Kind::Bel:
            return bel([&](const World& u) { return eval_fluent_formula(t->guards[0], u); });
        case Term::Kind::Expect: {
            Rational s = 0;
            for (const auto& [u, p] : kb.dist) s += u[t->index] * p;
            return s;
        }
        case Term::Kind::Conf: {
            Rational e = eval_belief_term(make_expect(t->index, t->name), kb);
            return bel([&](const World& u) {
                Rational d = abs(u[t->index] - e);
                return t->strict ? d < t->value : d <= t->value;
            });
        }
        default: throw EvalError(errc::kNotObjective, "fluent read outside a belief operator");
    }
}

bool eval_subjective(const FormulaPtr& f, const KnowledgeBase& kb) {
    return eval_bool(f, [&](const Formula& c) {
        return compare(c.op, eval_belief_term(c.lhs, kb), eval_belief_term(c.rhs, kb));
    });
}

Rational trace_likelihood(const ModelFile& m, const World& w, const std::vector<GroundAction>& z,
                          const BasicActionTheory& bat) {
    Rational l = 1;
    World cur = w;
    for (const auto& a : z) {
        l *= action_likelihood(m, a, cur, bat);
        if (l == 0) return 0;
        cur = progress_world(m, cur, a, bat);
    }
    return l;
}

std::string render_world(const ModelFile& m, const World& w) {
    std::string s = "[";
    bool first = true;
    for (FluentId f = 0; f < m.fluents.size() && f < w.size(); ++f) {
        if (f >= m.state_fluent_count() && w[f] == 0) continue;
        if (!first) s += ", ";
        first = false;
        s += m.fluents[f].name + "=" + to_string(w[f]);
    }
    return s + "]";
}

std::string render_distribution(const ModelFile& m, const BeliefDistribution& d) {
    std::string s = "{";
    bool first = true;
    for (const auto& [w, p] : d) {
        if (!first) s += ", ";
        first = false;
        s += render_world(m, w) + ": " + to_string(p);
    }
    return s + "}";
}

std::string print_ground_action(const ModelFile& m, const GroundAction& t) {
    std::string s = m.actions[t.action].name;
    if (t.ctrl.empty() && t.unctrl.empty()) return s;
    s += "(";
    bool first = true;
    for (const auto* part : {&t.ctrl, &t.unctrl}) {
        for (const auto& v : *part) {
            if (!first) s += ",";
            first = false;
            s += to_string(v);
        }
    }
    return s + ")";
}

GroundAction parse_ground_action(const ModelFile& m, std::string_view text) {
    auto bad = [&](std::string_view code, const std::string& msg) -> ModelError {
        return ModelError({Diagnostic{std::string(code), msg, 0, 0}});
    };
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    text = trim(text);
    std::string_view name = text;
    std::vector<Rational> args;
    if (auto open = text.find('('); open != std::string_view::npos) {
        if (text.back() != ')') throw bad(diag::kSyntax, "malformed ground action '" + std::string(text) + "'");
        name = trim(text.substr(0, open));
        std::string_view inner = text.substr(open + 1, text.size() - open - 2);
        if (!trim(inner).empty()) {
            std::size_t start = 0;
            while (true) {
                std::size_t comma = inner.find(',', start);
                auto piece = trim(inner.substr(start, comma == std::string_view::npos ? inner.npos : comma - start));
                auto r = parse_rational(piece);
                if (!r) throw bad(diag::kSyntax, "malformed argument '" + std::string(piece) + "'");
                args.push_back(*r);
                if (comma == std::string_view::npos) break;
                start = comma + 1;
            }
        }
    }
    auto aid = m.find_action(name);
    if (!aid) throw bad(diag::kUndeclared, "undeclared action '" + std::string(name) + "'");
    const ActionDecl& decl = m.actions[*aid];
    std::size_t want = decl.controllable_arity() + decl.uncontrollable_arity();
    if (args.size() != want)
        throw bad(diag::kArity, "action '" + std::string(name) + "' takes " + std::to_string(want) + " arguments");
    GroundAction g;
    g.action = *aid;
    g.ctrl.assign(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(decl.controllable_arity()));
    g.unctrl.assign(args.begin() + static_cast<std::ptrdiff_t>(decl.controllable_arity()), args.end());
    return g;
}

}  // namespace bp
