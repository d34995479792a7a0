#include "bp/graph.hpp"

#include "bp/dsl.hpp"

#include <deque>
#include <map>
#include <sstream>

namespace bp {

namespace {

// Literal-only folding: keeps guards readable without any theorem proving.
FormulaPtr conj(const FormulaPtr& a, const FormulaPtr& b) {
    if (a->kind == Formula::Kind::False || b->kind == Formula::Kind::False) return make_false();
    if (a->kind == Formula::Kind::True) return b;
    if (b->kind == Formula::Kind::True) return a;
    return make_and(a, b);
}

FormulaPtr disj(const FormulaPtr& a, const FormulaPtr& b) {
    if (a->kind == Formula::Kind::True || b->kind == Formula::Kind::True) return make_true();
    if (a->kind == Formula::Kind::False) return b;
    if (b->kind == Formula::Kind::False) return a;
    return make_or(a, b);
}

struct RawEdge {
    FormulaPtr guard;
    PrimitiveProgram rho;
    ProgramPtr target;
};

FormulaPtr fin_of(const ProgramPtr& p) {
    switch (p->kind) {
        case Program::Kind::Nil: return make_true();
        case Program::Kind::Prim: return make_false();
        case Program::Kind::Test: return p->test.root;
        case Program::Kind::Seq: return conj(fin_of(p->first), fin_of(p->second));
        case Program::Kind::Choice: return disj(fin_of(p->first), fin_of(p->second));
        case Program::Kind::Star: return make_true();
    }
    return make_false();
}

std::vector<RawEdge> edges_of(const ProgramPtr& p) {
    std::vector<RawEdge> out;
    switch (p->kind) {
        case Program::Kind::Nil:
        case Program::Kind::Test:
            break;
        case Program::Kind::Prim:
            out.push_back({make_true(), p->prim, make_nil()});
            break;
        case Program::Kind::Seq: {
            for (auto& e : edges_of(p->first))
                out.push_back({e.guard, e.rho, canonicalize(make_seq(e.target, p->second))});
            FormulaPtr fin1 = fin_of(p->first);
            for (auto& e : edges_of(p->second)) out.push_back({conj(fin1, e.guard), e.rho, e.target});
            break;
        }
        case Program::Kind::Choice:
            out = edges_of(p->first);
            for (auto& e : edges_of(p->second)) out.push_back(std::move(e));
            break;
        case Program::Kind::Star:
            for (auto& e : edges_of(p->first))
                out.push_back({e.guard, e.rho, canonicalize(make_seq(e.target, p))});
            break;
    }
    std::vector<RawEdge> live;
    for (auto& e : out)
        if (e.guard->kind != Formula::Kind::False) live.push_back(std::move(e));
    return live;
}

void key_into(const ProgramPtr& p, std::string& s) {
    switch (p->kind) {
        case Program::Kind::Nil: s += "N"; return;
        case Program::Kind::Prim:
            s += "P" + std::to_string(p->prim.action) + "(";
            for (const auto& v : p->prim.ctrl) s += to_string(v) + ",";
            s += ")";
            return;
        case Program::Kind::Test: s += "T[" + print(p->test) + "]"; return;
        case Program::Kind::Seq: s += "S("; break;
        case Program::Kind::Choice: s += "C("; break;
        case Program::Kind::Star: s += "R("; key_into(p->first, s); s += ")"; return;
    }
    key_into(p->first, s);
    s += ";";
    key_into(p->second, s);
    s += ")";
}

}  // namespace

ProgramPtr canonicalize(const ProgramPtr& p) {
    switch (p->kind) {
        case Program::Kind::Seq: {
            ProgramPtr a = canonicalize(p->first);
            ProgramPtr b = canonicalize(p->second);
            if (a->kind == Program::Kind::Nil) return b;
            if (b->kind == Program::Kind::Nil) return a;
            if (a == p->first && b == p->second) return p;
            return make_seq(a, b);
        }
        case Program::Kind::Choice: {
            ProgramPtr a = canonicalize(p->first);
            ProgramPtr b = canonicalize(p->second);
            if (a == p->first && b == p->second) return p;
            return make_choice(a, b);
        }
        case Program::Kind::Star: {
            ProgramPtr a = canonicalize(p->first);
            return a == p->first ? p : make_star(a);
        }
        default: return p;
    }
}

std::string program_key(const ProgramPtr& p) {
    std::string s;
    key_into(p, s);
    return s;
}

CharGraph build_graph(const ProgramPtr& delta) {
    CharGraph g;
    std::map<std::string, std::size_t> index;
    std::deque<std::size_t> work;
    auto intern = [&](const ProgramPtr& p) {
        std::string key = program_key(p);
        auto [it, fresh] = index.emplace(key, g.nodes.size());
        if (fresh) {
            g.nodes.push_back(p);
            g.out.emplace_back();
            work.push_back(it->second);
        }
        return it->second;
    };
    intern(canonicalize(delta));
    while (!work.empty()) {
        std::size_t v = work.front();
        work.pop_front();
        for (auto& e : edges_of(g.nodes[v])) {
            std::size_t target = intern(e.target);
            g.out[v].push_back(g.edges.size());
            g.edges.push_back({v, SubjectiveFormula{e.guard}, e.rho, target});
        }
    }
    g.nil_node = intern(make_nil());
    while (!work.empty()) work.pop_front();  // Nil has no edges

    for (std::size_t v = 0; v < g.nodes.size(); ++v) {
        FormulaPtr fin = fin_of(g.nodes[v]);
        FormulaPtr any = fin;
        for (std::size_t e : g.out[v]) any = disj(any, g.edges[e].guard.root);
        g.fin.push_back(SubjectiveFormula{fin});
        g.fail.push_back(SubjectiveFormula{any->kind == Formula::Kind::True    ? make_false()
                                           : any->kind == Formula::Kind::False ? make_true()
                                                                               : make_not(any)});
    }
    return g;
}

EnabledSet enabled(const CharGraph& g, std::size_t node, const KnowledgeBase& kb) {
    EnabledSet s;
    for (std::size_t e : g.out[node])
        if (eval_subjective(g.edges[e].guard, kb)) s.edges.push_back(e);
    s.is_final = eval_subjective(g.fin[node], kb);
    s.is_failing = eval_subjective(g.fail[node], kb);
    return s;
}

namespace {

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace

std::string graph_to_dot(const ModelFile& m, const CharGraph& g) {
    std::ostringstream out;
    out << "digraph program {\n  rankdir=LR;\n  node [shape=box, fontname=\"monospace\"];\n";
    for (std::size_t v = 0; v < g.nodes.size(); ++v) {
        std::string label = "n" + std::to_string(v) + (v == g.nil_node ? " (nil)" : "") +
                            "\\nFin: " + dot_escape(print(g.fin[v])) + "\\nFail: " + dot_escape(print(g.fail[v]));
        out << "  n" << v << " [label=\"" << label << "\"" << (v == 0 ? ", penwidth=2" : "") << "];\n";
    }
    for (const auto& e : g.edges) {
        out << "  n" << e.source << " -> n" << e.target << " [label=\"" << dot_escape(print_primitive(m, e.rho))
            << "\\n[" << dot_escape(print(e.guard)) << "]\"];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace bp
