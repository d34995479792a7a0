#include "bp/dsl.hpp"
#include "bp/kb.hpp"

#include <set>

namespace bp {

namespace {

void collect_primitives(const ProgramPtr& p, std::set<PrimitiveProgram>& out) {
    if (!p) return;
    if (p->kind == Program::Kind::Prim) out.insert(p->prim);
    collect_primitives(p->first, out);
    collect_primitives(p->second, out);
}

bool constant_weight(const TermPtr& t) {
    return is_rigid(t) && !mentions_params(t);
}

}  // namespace

std::vector<Diagnostic> validate_restrictions(const ModelFile& m) {
    std::vector<Diagnostic> out;
    auto report = [&](std::string_view code, std::string msg) { out.push_back({std::string(code), std::move(msg), 0, 0}); };

    // (a) initial belief
    Rational total = 0;
    for (const auto& [v, p] : m.kb0) {
        if (p <= 0) report(diag::kBeliefWeight, "belief weight " + to_string(p) + " at " + print_valuation(m, v) + " is not positive");
        total += p;
    }
    if (m.kb0.empty()) report(diag::kBeliefSum, "initial belief is empty");
    else if (total != 1) report(diag::kBeliefSum, "initial belief weights sum to " + to_string(total));

    // (b) outcomes and (c) constant rows
    for (ActionId a = 0; a < m.actions.size(); ++a) {
        const ActionDecl& decl = m.actions[a];
        if (decl.reserved()) continue;
        if (decl.outcomes.empty()) report(diag::kNoOutcomes, "action '" + decl.name + "' declares no outcomes");
        for (const auto* bat : {&m.real_bat, &m.believed_bat}) {
            const char* which = bat == &m.real_bat ? "real" : "believed";
            const auto& rows = bat->likelihood[a].rows;
            if (rows.empty() && !decl.outcomes.empty())
                report(diag::kContextGap, std::string(which) + " likelihood of '" + decl.name + "' has no contexts");
            for (std::size_t r = 0; r < rows.size(); ++r) {
                bool all_const = true;
                Rational sum = 0;
                for (const auto& w : rows[r].weights) {
                    if (!constant_weight(w)) {
                        all_const = false;
                        continue;
                    }
                    Rational c = eval_term(w, World{});
                    if (c < 0 || c > 1)
                        report(diag::kWeightRange, std::string(which) + " weight " + to_string(c) + " of '" + decl.name + "' outside [0,1]");
                    sum += c;
                }
                if (all_const && sum != 1)
                    report(diag::kRowSum, std::string(which) + " likelihood row " + std::to_string(r + 1) + " of '" +
                                              decl.name + "' sums to " + to_string(sum));
            }
        }
    }
    if (!out.empty()) return out;

    // (d) deferred assertions at the evaluation points the model exposes:
    // program instantiations against the belief support (believed theory)
    // and the listed initial worlds (real theory).
    std::set<PrimitiveProgram> prims;
    collect_primitives(m.program, prims);
    KnowledgeBase kb = initial_kb(m);
    std::set<std::string> seen;
    auto probe = [&](const World& w, const BasicActionTheory& bat) {
        for (const auto& rho : prims) {
            for (const auto& g : oi_alternatives(m, rho)) {
                try {
                    action_likelihood(m, g, w, bat);
                } catch (const EvalError& e) {
                    std::string msg = e.what();
                    if (seen.insert(msg).second) report(e.code(), msg.substr(e.code().size() + 2));
                }
            }
        }
    };
    for (const auto& [w, p] : kb.dist) probe(w, m.believed_bat);
    for (const auto& v : m.init.worlds) {
        World w = v;
        w.resize(m.fluents.size(), Rational(0));
        probe(w, m.real_bat);
    }
    return out;
}

}  // namespace bp
