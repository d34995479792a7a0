#include "bp/types.hpp"

#include "bp/dsl.hpp"
#include "bp/parallel.hpp"

#include <set>
#include <sstream>

namespace bp {

const char* source_name(ContextEntry::Source s) {
    switch (s) {
        case ContextEntry::Source::Init: return "init";
        case ContextEntry::Source::Likelihood: return "likelihood-context";
        case ContextEntry::Source::Test: return "test";
        case ContextEntry::Source::Property: return "property";
    }
    return "?";
}

namespace {

[[noreturn]] void fail(const char* code, const std::string& message) {
    throw ModelError({Diagnostic{code, message, 0, 0}});
}

void collect_program(const ProgramPtr& p, std::vector<PrimitiveProgram>& prims, std::vector<FormulaPtr>& tests) {
    if (!p) return;
    if (p->kind == Program::Kind::Prim && std::find(prims.begin(), prims.end(), p->prim) == prims.end())
        prims.push_back(p->prim);
    if (p->kind == Program::Kind::Test) tests.push_back(p->test.root);
    collect_program(p->first, prims, tests);
    collect_program(p->second, prims, tests);
}

void collect_leaves(const StatePtr& s, std::vector<FormulaPtr>& out) {
    if (!s) return;
    if (s->kind == StateFormula::Kind::Subj) {
        out.push_back(s->beta.root);
        return;
    }
    for (const auto& a : s->args) collect_leaves(a, out);
    if (s->trace) {
        collect_leaves(s->trace->lhs, out);
        collect_leaves(s->trace->rhs, out);
    }
}

bool is_subjective(const FormulaPtr& f);

bool term_subjective(const TermPtr& t) {
    switch (t->kind) {
        case Term::Kind::Bel:
        case Term::Kind::Expect:
        case Term::Kind::Conf: return true;
        default:
            for (const auto& a : t->args)
                if (term_subjective(a)) return true;
            return false;
    }
}

bool is_subjective(const FormulaPtr& f) {
    if (f->kind == Formula::Kind::Cmp) return term_subjective(f->lhs) || term_subjective(f->rhs);
    for (const auto& a : f->args)
        if (is_subjective(a)) return true;
    return false;
}

}  // namespace

ProgramContext program_context(const ModelFile& m, const StatePtr& property) {
    ProgramContext ctx;
    std::map<std::string, std::size_t> by_text;
    auto add = [&](const FormulaPtr& f, bool subjective, ContextEntry::Source src, bool negated) {
        std::string text = print_formula(f);
        auto it = by_text.find(text);
        if (it != by_text.end()) return it->second;
        by_text.emplace(text, ctx.entries.size());
        ctx.entries.push_back({f, subjective, negated, src, text});
        return ctx.entries.size() - 1;
    };

    for (const auto& c : m.init.constraints) add(c.root, false, ContextEntry::Source::Init, false);

    std::vector<PrimitiveProgram> prims;
    std::vector<FormulaPtr> tests;
    collect_program(m.program, prims, tests);
    for (const auto& rho : prims) {
        const auto& rows = m.real_bat.likelihood[rho.action].rows;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            FormulaPtr bound = bind_params(rows[r].context.root, rho.ctrl);
            ctx.likelihood_entry[{rho.action, rho.ctrl, r}] = add(bound, false, ContextEntry::Source::Likelihood, false);
        }
    }
    for (const auto& t : tests) add(t, true, ContextEntry::Source::Test, false);

    std::vector<FormulaPtr> leaves;
    collect_leaves(property, leaves);
    for (const auto& l : leaves) add(l, is_subjective(l), ContextEntry::Source::Property, false);

    std::size_t base = ctx.entries.size();
    for (std::size_t i = 0; i < base; ++i) {
        ContextEntry e = ctx.entries[i];
        add(make_not(e.formula), e.subjective, e.source, true);
    }
    return ctx;
}

std::vector<GroundAction> ground_action_universe(const ModelFile& m) {
    std::vector<PrimitiveProgram> prims;
    std::vector<FormulaPtr> tests;
    collect_program(m.program, prims, tests);
    std::vector<GroundAction> out;
    for (const auto& rho : prims)
        for (auto& g : oi_alternatives(m, rho))
            if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(std::move(g));
    out.push_back(eps_action(m));
    out.push_back(abort_action(m));
    return out;
}

std::size_t horizon_of(const StatePtr& phi) {
    switch (phi->kind) {
        case StateFormula::Kind::Subj: return 0;
        case StateFormula::Kind::Not:
        case StateFormula::Kind::And:
        case StateFormula::Kind::Or: {
            std::size_t k = 0;
            for (const auto& a : phi->args) k = std::max(k, horizon_of(a));
            return k;
        }
        case StateFormula::Kind::Prob: {
            const TraceFormula& t = *phi->trace;
            for (const auto& s : {t.lhs, t.rhs})
                if (s && s->kind != StateFormula::Kind::Subj)
                    fail("C-NESTED-P", "inadmissible: nested probability operator");
            if (t.kind == TraceFormula::Kind::Until) fail("C-UNBOUNDED", "inadmissible: unbounded until");
            return t.kind == TraceFormula::Kind::Next ? 1 : t.bound;
        }
    }
    return 0;
}

void check_representatives(const ModelFile& m, const std::vector<World>& reps) {
    if (reps.empty()) fail("T-REPS-EMPTY", "no representative initial worlds");
    std::vector<Diagnostic> diags;
    for (const auto& w : reps) {
        if (w.size() != m.fluents.size() || w[m.final_fluent()] != 0 || w[m.fail_fluent()] != 0) {
            diags.push_back({"T-REPS-SHAPE", "representative " + render_world(m, w) + " is not an initial world", 0, 0});
            continue;
        }
        for (const auto& c : m.init.constraints) {
            if (!eval_fluent_formula(c, w)) {
                diags.push_back({"T-REPS-SIGMA0",
                                 "representative " + render_world(m, w) + " violates " + print(c), 0, 0});
                break;
            }
        }
    }
    if (!diags.empty()) throw ModelError(std::move(diags));
}

TypeAnalysis compute_types(const ModelFile& m, std::size_t k, const std::vector<World>& reps,
                           const StatePtr& property, const TypeOptions& options) {
    check_representatives(m, reps);
    TypeAnalysis out;
    out.k = k;
    out.context = program_context(m, property);
    out.universe = ground_action_universe(m);
    const std::size_t n_entries = out.context.size();
    const std::size_t n_actions = out.universe.size();

    // subtree[d] = number of sequences of length <= d
    std::vector<std::size_t> subtree(k + 1, 1);
    for (std::size_t d = 1; d <= k; ++d) subtree[d] = 1 + n_actions * subtree[d - 1];
    out.full_sequence_count = subtree[k];

    SequenceTable& table = out.table;
    std::vector<std::vector<World>> worlds;  // [seq][rep]

    auto eval_subjective_bits = [&](const std::optional<KnowledgeBase>& kb) {
        std::vector<char> bits(n_entries, 0);
        if (!kb) return bits;
        for (std::size_t e = 0; e < n_entries; ++e)
            if (out.context.entries[e].subjective) bits[e] = eval_subjective(out.context.entries[e].formula, *kb);
        return bits;
    };

    struct Frame {
        std::vector<GroundAction> z;
        std::optional<KnowledgeBase> kb;
        std::vector<World> ws;
        std::vector<Rational> ls;
    };
    std::vector<Frame> stack;
    stack.push_back({{}, initial_kb(m), reps, std::vector<Rational>(reps.size(), Rational(1))});
    while (!stack.empty()) {
        Frame f = std::move(stack.back());
        stack.pop_back();
        if (table.seqs.size() >= options.max_sequences)
            fail("T-TOO-MANY-SEQUENCES", "more than " + std::to_string(options.max_sequences) + " action sequences");
        table.index.emplace(f.z, table.seqs.size());
        table.seqs.push_back(f.z);
        table.subjective.push_back(eval_subjective_bits(f.kb));
        table.kbs.push_back(f.kb);
        worlds.push_back(f.ws);
        if (f.z.size() == k) continue;
        // Push children in reverse so they pop in universe order.
        for (std::size_t i = n_actions; i-- > 0;) {
            const GroundAction& a = out.universe[i];
            Frame child;
            child.z = f.z;
            child.z.push_back(a);
            bool any = false;
            for (std::size_t r = 0; r < reps.size(); ++r) {
                Rational l = f.ls[r] == 0 ? Rational(0) : f.ls[r] * action_likelihood(m, a, f.ws[r], m.real_bat);
                any = any || l != 0;
                child.ls.push_back(l);
                child.ws.push_back(progress_world(m, f.ws[r], a, m.real_bat));
            }
            if (!any) {
                out.pruned_sequences += subtree[k - child.z.size()];
                continue;
            }
            child.kb = f.kb ? try_progress_kb(m, *f.kb, a) : std::nullopt;
            stack.push_back(std::move(child));
        }
    }

    std::size_t incompatible = 0;
    for (const auto& kb : table.kbs)
        if (!kb) ++incompatible;
    if (incompatible)
        out.notes.push_back(std::to_string(incompatible) +
                            " enumerated sequence(s) are incompatible with the initial belief");
    if (out.pruned_sequences)
        out.notes.push_back("pruned " + std::to_string(out.pruned_sequences) + " of " +
                            std::to_string(out.full_sequence_count) +
                            " sequences with zero real likelihood for every representative");

    // Per-representative assignments.
    const std::size_t n_seqs = table.seqs.size();
    std::vector<std::vector<char>> bits(reps.size());
    parallel_chunks(reps.size(), options.threads, [&](std::size_t lo, std::size_t hi, unsigned) {
        for (std::size_t r = lo; r < hi; ++r) {
            auto& b = bits[r];
            b.assign(n_seqs * n_entries, 0);
            for (std::size_t s = 0; s < n_seqs; ++s) {
                for (std::size_t e = 0; e < n_entries; ++e) {
                    const ContextEntry& ce = out.context.entries[e];
                    b[s * n_entries + e] =
                        ce.subjective ? table.subjective[s][e] : eval_fluent_formula(ce.formula, worlds[s][r]);
                }
            }
        }
    });

    std::map<std::vector<char>, std::size_t> seen;
    for (std::size_t r = 0; r < reps.size(); ++r) {
        auto [it, fresh] = seen.emplace(bits[r], out.types.size());
        if (fresh) {
            TypeAssignment t;
            t.bits = std::move(bits[r]);
            t.witness = reps[r];
            t.entry_count = n_entries;
            t.members.push_back(reps[r]);
            out.types.push_back(std::move(t));
        } else {
            out.types[it->second].members.push_back(reps[r]);
        }
    }
    return out;
}

std::vector<World> reps_from_ranges(const ModelFile& m, const std::vector<std::string>& specs) {
    std::vector<std::vector<Rational>> values(m.state_fluent_count());
    std::vector<bool> given(m.state_fluent_count(), false);
    for (const auto& spec : specs) {
        auto eq = spec.find('=');
        if (eq == std::string::npos) fail("E-SYNTAX", "range '" + spec + "' must look like fluent=lo..hi");
        std::string name = spec.substr(0, eq);
        auto fid = m.find_fluent(name);
        if (!fid || *fid >= m.state_fluent_count()) fail("E-UNDECLARED", "unknown fluent '" + name + "' in range");
        std::string rest = spec.substr(eq + 1);
        auto dots = rest.find("..");
        auto lo = parse_rational(rest.substr(0, dots));
        auto hi = dots == std::string::npos ? lo : parse_rational(rest.substr(dots + 2));
        if (!lo || !hi || lo->get_den() != 1 || hi->get_den() != 1 || *lo > *hi)
            fail("E-SYNTAX", "range '" + spec + "' needs integer bounds lo <= hi");
        for (Rational v = *lo; v <= *hi; v += 1)
            if (std::find(values[*fid].begin(), values[*fid].end(), v) == values[*fid].end()) values[*fid].push_back(v);
        given[*fid] = true;
    }
    for (FluentId f = 0; f < m.state_fluent_count(); ++f)
        if (!given[f]) fail("E-VALUATION", "no range given for fluent '" + m.fluents[f].name + "'");
    std::vector<World> out{World(m.fluents.size(), Rational(0))};
    for (FluentId f = 0; f < m.state_fluent_count(); ++f) {
        std::vector<World> next;
        for (const auto& w : out)
            for (const auto& v : values[f]) {
                World x = w;
                x[f] = v;
                next.push_back(std::move(x));
            }
        out = std::move(next);
    }
    return out;
}

std::vector<World> reps_from_text(const ModelFile& m, const std::string& text) {
    std::vector<World> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_valuation(m, line));
    }
    return out;
}

namespace {

void constants_in(const FormulaPtr& f, std::vector<std::set<Rational>>& out) {
    if (f->kind == Formula::Kind::Cmp) {
        auto pair = [&](const TermPtr& a, const TermPtr& b) {
            if (a->kind == Term::Kind::Fluent && b->kind == Term::Kind::Const && a->index < out.size())
                out[a->index].insert(b->value);
        };
        pair(f->lhs, f->rhs);
        pair(f->rhs, f->lhs);
        for (const auto& t : {f->lhs, f->rhs})
            if (t->kind == Term::Kind::Bel) constants_in(t->guards[0], out);
        return;
    }
    for (const auto& a : f->args) constants_in(a, out);
}

}  // namespace

std::vector<World> reps_auto(const ModelFile& m, std::size_t k) {
    const std::size_t n = m.state_fluent_count();
    std::vector<std::set<Rational>> consts(n);
    for (const auto& c : m.init.constraints) constants_in(c.root, consts);
    std::vector<PrimitiveProgram> prims;
    std::vector<FormulaPtr> tests;
    collect_program(m.program, prims, tests);
    for (const auto& rho : prims)
        for (const auto& row : m.real_bat.likelihood[rho.action].rows)
            constants_in(bind_params(row.context.root, rho.ctrl), consts);
    for (const auto& t : tests) constants_in(t, consts);

    std::vector<std::set<Rational>> values(n);
    long spread = static_cast<long>(k) + 1;
    for (FluentId f = 0; f < n; ++f) {
        if (consts[f].empty()) consts[f].insert(0);
        for (const auto& c : consts[f])
            for (long d = -spread; d <= spread; ++d) values[f].insert(c + d);
        for (const auto& [v, p] : m.kb0) values[f].insert(v[f]);
        for (const auto& w : m.init.worlds) values[f].insert(w[f]);
    }
    std::vector<World> out{World(m.fluents.size(), Rational(0))};
    for (FluentId f = 0; f < n; ++f) {
        std::vector<World> next;
        for (const auto& w : out)
            for (const auto& v : values[f]) {
                World x = w;
                x[f] = v;
                next.push_back(std::move(x));
            }
        if (next.size() > 100000) fail("T-TOO-MANY-REPS", "automatic representatives exceed 100000 worlds");
        out = std::move(next);
    }
    std::vector<World> kept;
    for (auto& w : out) {
        bool ok = true;
        for (const auto& c : m.init.constraints) ok = ok && eval_fluent_formula(c, w);
        if (ok) kept.push_back(std::move(w));
    }
    return kept;
}

}  // namespace bp
