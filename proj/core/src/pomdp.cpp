#include "bp/pomdp.hpp"

#include "bp/dsl.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace bp {

std::size_t FinitePomdp::transition_count() const {
    std::size_t n = 0;
    for (const auto& opts : options)
        for (const auto& o : opts) n += o.succ.size();
    return n;
}

namespace {

[[noreturn]] void internal(const std::string& message) {
    throw ModelError({Diagnostic{"P-INTERNAL", message, 0, 0}});
}

// Real probability of ground outcome t of rho at sequence z, read from the
// type's likelihood-context entries.
Rational outcome_probability(const ModelFile& m, const TypeAnalysis& a, const TypeAssignment& tau, std::size_t seq,
                             const GroundAction& t) {
    const ActionDecl& decl = m.actions[t.action];
    const auto& rows = m.real_bat.likelihood[t.action].rows;
    std::optional<std::size_t> row;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto it = a.context.likelihood_entry.find({t.action, t.ctrl, r});
        if (it == a.context.likelihood_entry.end()) internal("likelihood context missing from the program context");
        if (!tau.holds(seq, it->second)) continue;
        if (row) internal("two likelihood contexts hold for " + print_ground_action(m, t));
        row = r;
    }
    if (!row) internal("no likelihood context holds for " + print_ground_action(m, t));
    Rational p = 0;
    for (std::size_t j = 0; j < decl.outcomes.size(); ++j) {
        bool match = true;
        for (std::size_t i = 0; i < decl.outcomes[j].size() && match; ++i)
            match = eval_term(decl.outcomes[j][i], World{}, t.ctrl) == t.unctrl[i];
        if (match) p += eval_term(rows[*row].weights[j], World{}, t.ctrl);
    }
    return p;
}

}  // namespace

FinitePomdp build_pomdp(const ModelFile& m, const CharGraph& g, const TypeAnalysis& a, std::size_t type_index) {
    const TypeAssignment& tau = a.types.at(type_index);
    const SequenceTable& table = a.table;
    FinitePomdp p;
    p.k = a.k;
    for (std::size_t e = 0; e < a.context.size(); ++e) {
        if (!a.context.entries[e].subjective) continue;
        p.ap.push_back(a.context.entries[e].text);
        p.ap_entry.push_back(e);
    }

    std::map<std::pair<std::size_t, std::size_t>, std::size_t> index;
    std::optional<std::size_t> sink;
    std::deque<std::size_t> work;
    auto intern = [&](std::size_t seq, std::size_t node) {
        auto [it, fresh] = index.emplace(std::make_pair(seq, node), p.states.size());
        if (fresh) {
            p.states.push_back({seq, node, false, table.seqs[seq].size() == a.k});
            p.options.emplace_back();
            work.push_back(it->second);
        }
        return it->second;
    };
    auto sink_state = [&] {
        if (!sink) {
            sink = p.states.size();
            p.states.push_back({0, 0, true, false});
            p.options.push_back({PomdpOption{PomdpOption::Kind::Fail, 0, {}, {{*sink, Rational(1), std::nullopt}}}});
        }
        return *sink;
    };
    auto child_seq = [&](std::size_t seq, const GroundAction& t) {
        auto z = table.seqs[seq];
        z.push_back(t);
        auto found = table.find(z);
        if (!found) internal("sequence missing from the type table");
        return *found;
    };

    p.initial = intern(0, 0);
    while (!work.empty()) {
        std::size_t s = work.front();
        work.pop_front();
        const PomdpState st = p.states[s];
        std::vector<PomdpOption> opts;
        if (st.frontier) {
            opts.push_back({PomdpOption::Kind::Fail, 0, {}, {{s, Rational(1), std::nullopt}}});
            p.options[s] = std::move(opts);
            continue;
        }
        const auto& kb = table.kbs[st.seq];
        if (!kb) internal("reachable state with an incompatible belief");
        EnabledSet en = enabled(g, st.node, *kb);
        for (std::size_t e : en.edges) {
            const GraphEdge& edge = g.edges[e];
            PomdpOption o{PomdpOption::Kind::Edge, e, edge.rho, {}};
            for (const auto& t : oi_alternatives(m, edge.rho)) {
                Rational prob = outcome_probability(m, a, tau, st.seq, t);
                if (prob == 0) continue;
                std::size_t zs = child_seq(st.seq, t);
                std::size_t target;
                if (!table.kbs[zs]) {
                    target = sink_state();
                    ++p.breakdown_branches;
                } else {
                    target = intern(zs, edge.target);
                }
                o.succ.push_back({target, prob, t});
            }
            Rational total = 0;
            for (const auto& tr : o.succ) total += tr.prob;
            if (total != 1) internal("outgoing mass " + to_string(total) + " for " + print_primitive(m, edge.rho));
            opts.push_back(std::move(o));
        }
        if (en.is_final) {
            GroundAction eps = eps_action(m);
            opts.push_back({PomdpOption::Kind::Eps, 0, {}, {{intern(child_seq(st.seq, eps), g.nil_node), Rational(1), eps}}});
        }
        if (en.is_failing) {
            GroundAction ab = abort_action(m);
            opts.push_back({PomdpOption::Kind::Fail, 0, {}, {{intern(child_seq(st.seq, ab), st.node), Rational(1), ab}}});
        }
        p.options[s] = std::move(opts);
    }

    // Observations: exact distribution equality.
    std::map<KnowledgeBase, std::size_t> obs_index;
    p.obs_of.resize(p.states.size());
    for (std::size_t s = 0; s < p.states.size(); ++s) {
        if (p.states[s].sink) continue;
        const KnowledgeBase& kb = *table.kbs[p.states[s].seq];
        auto [it, fresh] = obs_index.emplace(kb, p.observations.size());
        if (fresh) {
            p.observations.push_back(kb);
            std::vector<char> lab(p.ap.size(), 0);
            for (std::size_t i = 0; i < p.ap.size(); ++i)
                lab[i] = eval_subjective(a.context.entries[p.ap_entry[i]].formula, kb);
            p.labels.push_back(std::move(lab));
        }
        p.obs_of[s] = it->second;
    }
    if (sink) {
        p.sink_obs = p.observations.size();
        p.observations.push_back(KnowledgeBase{});
        p.labels.emplace_back(p.ap.size(), 0);
        p.obs_of[*sink] = *p.sink_obs;
    }

    std::map<std::size_t, std::set<std::string>> sigs;
    for (std::size_t s = 0; s < p.states.size(); ++s)
        if (!p.states[s].frontier && !p.states[s].sink) sigs[p.obs_of[s]].insert(option_signature(m, p, s));
    for (const auto& [o, set] : sigs)
        if (set.size() > 1) ++p.nonuniform_observations;
    return p;
}

std::string option_label(const ModelFile& m, const PomdpOption& o) {
    switch (o.kind) {
        case PomdpOption::Kind::Edge: return print_primitive(m, o.rho);
        case PomdpOption::Kind::Eps: return std::string(kEpsAction);
        case PomdpOption::Kind::Fail: return std::string(kAbortAction);
    }
    return "?";
}

std::string option_signature(const ModelFile& m, const FinitePomdp& p, std::size_t state) {
    std::string s;
    for (const auto& o : p.options[state]) {
        if (!s.empty()) s += " | ";
        if (o.kind == PomdpOption::Kind::Edge) s += "e" + std::to_string(o.edge) + ":";
        s += option_label(m, o);
    }
    return s;
}

namespace {

std::string seq_name(const ModelFile& m, const std::vector<GroundAction>& z) {
    if (z.empty()) return "<>";
    std::string s;
    for (std::size_t i = 0; i < z.size(); ++i) s += (i ? "." : "") + print_ground_action(m, z[i]);
    return s;
}

}  // namespace

std::string state_name(const ModelFile& m, const TypeAnalysis& a, const FinitePomdp& p, std::size_t s) {
    const PomdpState& st = p.states[s];
    if (st.sink) return "breakdown";
    return "<" + seq_name(m, a.table.seqs[st.seq]) + ", n" + std::to_string(st.node) + ">";
}

std::string pomdp_fingerprint(const ModelFile& m, const TypeAnalysis& a, const FinitePomdp& p) {
    std::vector<std::string> lines;
    auto obs_text = [&](std::size_t o) {
        if (p.sink_obs && o == *p.sink_obs) return std::string("breakdown");
        std::string s = render_distribution(m, p.observations[o].dist) + " {";
        for (std::size_t i = 0; i < p.ap.size(); ++i)
            if (p.labels[o][i]) s += p.ap[i] + ";";
        return s + "}";
    };
    for (std::size_t s = 0; s < p.states.size(); ++s) {
        std::string line = state_name(m, a, p, s) + (s == p.initial ? " initial" : "") +
                           (p.states[s].frontier ? " frontier" : "") + " obs=" + obs_text(p.obs_of[s]);
        for (const auto& o : p.options[s]) {
            std::vector<std::string> succ;
            for (const auto& t : o.succ) succ.push_back(state_name(m, a, p, t.target) + ":" + to_string(t.prob));
            std::sort(succ.begin(), succ.end());
            line += " [" + option_label(m, o) + (o.kind == PomdpOption::Kind::Edge ? "#" + std::to_string(o.edge) : "") +
                    " ->";
            for (const auto& x : succ) line += " " + x;
            line += "]";
        }
        lines.push_back(std::move(line));
    }
    std::sort(lines.begin(), lines.end());
    std::string out = "k=" + std::to_string(p.k) + "\n";
    for (const auto& l : lines) out += l + "\n";
    return out;
}

std::string pomdp_to_json(const ModelFile& m, const TypeAnalysis& a, const FinitePomdp& p, std::size_t type_index) {
    using nlohmann::json;
    json j;
    j["type"] = type_index;
    j["k"] = p.k;
    j["witness"] = render_world(m, a.types.at(type_index).witness);
    j["initial"] = p.initial;
    j["atomic_propositions"] = p.ap;
    json states = json::array();
    json transitions = json::array();
    for (std::size_t s = 0; s < p.states.size(); ++s) {
        const PomdpState& st = p.states[s];
        json js;
        js["id"] = s;
        js["name"] = state_name(m, a, p, s);
        js["sink"] = st.sink;
        js["frontier"] = st.frontier;
        js["node"] = st.node;
        json seq = json::array();
        if (!st.sink)
            for (const auto& t : a.table.seqs[st.seq]) seq.push_back(print_ground_action(m, t));
        js["sequence"] = seq;
        js["observation"] = p.obs_of[s];
        states.push_back(js);
        for (const auto& o : p.options[s]) {
            for (const auto& t : o.succ) {
                json jt;
                jt["from"] = s;
                jt["action"] = option_label(m, o);
                if (o.kind == PomdpOption::Kind::Edge) jt["edge"] = o.edge;
                jt["to"] = t.target;
                jt["prob"] = to_string(t.prob);
                if (t.outcome) jt["outcome"] = print_ground_action(m, *t.outcome);
                transitions.push_back(jt);
            }
        }
    }
    json observations = json::array();
    for (std::size_t o = 0; o < p.observations.size(); ++o) {
        json jo;
        jo["id"] = o;
        jo["sink"] = p.sink_obs && o == *p.sink_obs;
        json dist = json::array();
        for (const auto& [w, pr] : p.observations[o].dist) {
            json world = json::object();
            for (FluentId f = 0; f < m.fluents.size(); ++f) world[m.fluents[f].name] = to_string(w[f]);
            dist.push_back({{"world", world}, {"p", to_string(pr)}});
        }
        jo["distribution"] = dist;
        jo["rendered"] = render_distribution(m, p.observations[o].dist);
        json labels = json::array();
        for (std::size_t i = 0; i < p.ap.size(); ++i)
            if (p.labels[o][i]) labels.push_back(p.ap[i]);
        jo["labels"] = labels;
        observations.push_back(jo);
    }
    j["states"] = states;
    j["transitions"] = transitions;
    j["observations"] = observations;
    return j.dump(2);
}

std::string pomdp_to_dot(const ModelFile& m, const TypeAnalysis& a, const FinitePomdp& p) {
    static const char* palette[] = {"black", "blue", "green4", "red", "orange", "purple", "brown", "cyan4", "magenta", "gold4"};
    std::ostringstream out;
    out << "digraph pomdp {\n  rankdir=LR;\n  node [shape=ellipse, fontname=\"monospace\"];\n";
    for (std::size_t s = 0; s < p.states.size(); ++s) {
        std::size_t o = p.obs_of[s];
        const char* color = p.sink_obs && o == *p.sink_obs ? "gray" : palette[o % 10];
        out << "  s" << s << " [label=\"" << state_name(m, a, p, s) << "\\no" << o << "\", color=" << color
            << ", fontcolor=" << color << (s == p.initial ? ", penwidth=2" : "") << "];\n";
    }
    for (std::size_t s = 0; s < p.states.size(); ++s)
        for (const auto& o : p.options[s])
            for (const auto& t : o.succ)
                out << "  s" << s << " -> s" << t.target << " [label=\"" << option_label(m, o) << " "
                    << to_string(t.prob) << "\"];\n";
    out << "}\n";
    return out.str();
}

}  // namespace bp
