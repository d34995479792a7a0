#include "bp/dsl.hpp"

#include <sstream>

namespace bp {

namespace {

using Names = std::vector<std::string>;

const char* op_text(CmpOp op) {
    switch (op) {
        case CmpOp::Eq: return "=";
        case CmpOp::Ne: return "!=";
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
    }
    return "?";
}

std::string formula_text(const FormulaPtr& f, const Names* names);

std::string term_text(const TermPtr& t, const Names* names) {
    switch (t->kind) {
        case Term::Kind::Const: return to_string(t->value);
        case Term::Kind::Fluent: return t->name;
        case Term::Kind::Param:
            return names && t->index < names->size() ? (*names)[t->index] : t->name;
        case Term::Kind::Add:
        case Term::Kind::Sub:
        case Term::Kind::Mul:
        case Term::Kind::Div: {
            const char* op = t->kind == Term::Kind::Add   ? " + "
                             : t->kind == Term::Kind::Sub ? " - "
                             : t->kind == Term::Kind::Mul ? " * "
                                                          : " / ";
            return "(" + term_text(t->args[0], names) + op + term_text(t->args[1], names) + ")";
        }
        case Term::Kind::Neg: return "-(" + term_text(t->args[0], names) + ")";
        case Term::Kind::Cases: {
            std::string s;
            for (std::size_t i = 0; i < t->guards.size(); ++i) {
                s += i == 0 ? "if " : " elif ";
                s += formula_text(t->guards[i], names) + " then " + term_text(t->args[i], names);
            }
            return s + " else " + term_text(t->args.back(), names) + " end";
        }
        case Term::Kind::Bel: return "B(" + formula_text(t->guards[0], nullptr) + ")";
        case Term::Kind::Expect: return "Exp(" + t->name + ")";
        case Term::Kind::Conf:
            return std::string(t->strict ? "ConfOpen(" : "Conf(") + t->name + ", " + to_string(t->value) + ")";
    }
    return "?";
}

std::string formula_text(const FormulaPtr& f, const Names* names) {
    switch (f->kind) {
        case Formula::Kind::True: return "true";
        case Formula::Kind::False: return "false";
        case Formula::Kind::Cmp:
            return term_text(f->lhs, names) + " " + op_text(f->op) + " " + term_text(f->rhs, names);
        case Formula::Kind::Not: return "!(" + formula_text(f->args[0], names) + ")";
        case Formula::Kind::And:
        case Formula::Kind::Or: {
            const char* op = f->kind == Formula::Kind::And ? " && " : " || ";
            return "(" + formula_text(f->args[0], names) + op + formula_text(f->args[1], names) + ")";
        }
    }
    return "?";
}

std::string interval_text(const Interval& iv) {
    if (iv.lo == iv.hi && iv.lo_closed && iv.hi_closed) return "=" + to_string(iv.lo);
    if (iv.lo == 0 && iv.lo_closed) return (iv.hi_closed ? "<=" : "<") + to_string(iv.hi);
    if (iv.hi == 1 && iv.hi_closed) return (iv.lo_closed ? ">=" : ">") + to_string(iv.lo);
    return std::string(iv.lo_closed ? "[" : "(") + to_string(iv.lo) + "," + to_string(iv.hi) +
           (iv.hi_closed ? "]" : ")");
}

void program_stmts(const ModelFile& m, const ProgramPtr& p, std::ostringstream& out, const std::string& indent);

std::string block_text(const ModelFile& m, const ProgramPtr& p, const std::string& indent) {
    std::ostringstream out;
    program_stmts(m, p, out, indent + "  ");
    return "{\n" + out.str() + indent + "}";
}

void program_stmts(const ModelFile& m, const ProgramPtr& p, std::ostringstream& out, const std::string& indent) {
    switch (p->kind) {
        case Program::Kind::Nil: out << indent << "nil;\n"; return;
        case Program::Kind::Prim: out << indent << print_primitive(m, p->prim) << ";\n"; return;
        case Program::Kind::Test: out << indent << "test " << print(p->test) << ";\n"; return;
        case Program::Kind::Seq:
            // A left-nested sequence needs an explicit block to keep its shape.
            if (p->first->kind == Program::Kind::Seq) out << indent << block_text(m, p->first, indent) << "\n";
            else program_stmts(m, p->first, out, indent);
            program_stmts(m, p->second, out, indent);
            return;
        case Program::Kind::Choice:
            out << indent << "choose " << block_text(m, p->first, indent) << " or " << block_text(m, p->second, indent)
                << "\n";
            return;
        case Program::Kind::Star: out << indent << "star " << block_text(m, p->first, indent) << "\n"; return;
    }
}

void likelihood_text(const ModelFile& m, ActionId a, const LikelihoodTable& table, std::ostringstream& out,
                     const std::string& indent) {
    const ActionDecl& decl = m.actions[a];
    out << indent << "likelihood {\n";
    for (const auto& row : table.rows) {
        out << indent << "  ";
        if (row.otherwise) out << "otherwise: ";
        else out << "when " << formula_text(row.context.root, &decl.ctrl_params) << ": ";
        for (std::size_t j = 0; j < row.weights.size(); ++j) {
            if (j) out << ", ";
            out << term_text(row.weights[j], &decl.ctrl_params);
        }
        out << ";\n";
    }
    out << indent << "}\n";
}

std::string ssa_text(const ModelFile& m, FluentId f, const std::vector<SsaCase>& cases, const std::string& indent) {
    std::ostringstream out;
    out << indent << "ssa " << m.fluents[f].name << " {\n";
    for (const auto& c : cases) {
        const ActionDecl& decl = m.actions[c.action];
        Names names = decl.ctrl_params;
        names.insert(names.end(), decl.unctrl_params.begin(), decl.unctrl_params.end());
        out << indent << "  case " << decl.name << "(";
        for (std::size_t i = 0; i < names.size(); ++i) out << (i ? ", " : "") << names[i];
        out << "): " << term_text(c.effect, &names) << ";\n";
    }
    out << indent << "}\n";
    return out.str();
}

std::string table_text(const ModelFile& m, ActionId a, const LikelihoodTable& t) {
    std::ostringstream out;
    likelihood_text(m, a, t, out, "");
    return out.str();
}

}  // namespace

std::string print_term(const TermPtr& t) {
    return term_text(t, nullptr);
}

std::string print_formula(const FormulaPtr& f) {
    return formula_text(f, nullptr);
}

std::string print_primitive(const ModelFile& m, const PrimitiveProgram& p) {
    std::string s = m.actions[p.action].name;
    if (p.ctrl.empty()) return s;
    s += "(";
    for (std::size_t i = 0; i < p.ctrl.size(); ++i) s += (i ? "," : "") + to_string(p.ctrl[i]);
    return s + ")";
}

std::string print_program(const ModelFile& m, const ProgramPtr& p) {
    std::ostringstream out;
    program_stmts(m, p, out, "");
    return out.str();
}

std::string print_state_formula(const StatePtr& s) {
    switch (s->kind) {
        case StateFormula::Kind::Subj: return print(s->beta);
        case StateFormula::Kind::Not: return "!(" + print_state_formula(s->args[0]) + ")";
        case StateFormula::Kind::And:
        case StateFormula::Kind::Or: {
            const char* op = s->kind == StateFormula::Kind::And ? " && " : " || ";
            return "(" + print_state_formula(s->args[0]) + op + print_state_formula(s->args[1]) + ")";
        }
        case StateFormula::Kind::Prob:
            return "P" + interval_text(s->interval) + " [" + print_trace_formula(s->trace) + "]";
    }
    return "?";
}

std::string print_trace_formula(const TracePtr& t) {
    switch (t->kind) {
        case TraceFormula::Kind::Next: return "X " + print_state_formula(t->rhs);
        case TraceFormula::Kind::Until:
            return print_state_formula(t->lhs) + " U " + print_state_formula(t->rhs);
        case TraceFormula::Kind::BoundedUntil:
            return print_state_formula(t->lhs) + " U<=" + std::to_string(t->bound) + " " +
                   print_state_formula(t->rhs);
    }
    return "?";
}

std::string print_valuation(const ModelFile& m, const Valuation& v) {
    std::string s = "{";
    for (FluentId f = 0; f < m.state_fluent_count(); ++f) {
        if (f) s += ", ";
        s += m.fluents[f].name + " = " + (f < v.size() ? to_string(v[f]) : std::string("0"));
    }
    return s + "}";
}

std::string print_model(const ModelFile& m) {
    std::ostringstream out;
    out << "fluents {";
    for (FluentId f = 0; f < m.state_fluent_count(); ++f) out << (f ? ", " : " ") << m.fluents[f].name;
    out << " }\n";

    for (ActionId a = 0; a < m.actions.size(); ++a) {
        const ActionDecl& decl = m.actions[a];
        if (decl.reserved()) continue;
        out << "\naction " << decl.name;
        auto list = [&](const Names& names) {
            for (std::size_t i = 0; i < names.size(); ++i) out << (i ? ", " : "") << names[i];
        };
        if (decl.kind == ActionDecl::Kind::Stochastic) {
            out << " stochastic(";
            list(decl.ctrl_params);
            out << "; ";
            list(decl.unctrl_params);
            out << ") {\n";
        } else {
            out << " sensing(";
            list(decl.unctrl_params);
            out << ") {\n";
        }
        out << "  outcomes:";
        for (std::size_t j = 0; j < decl.outcomes.size(); ++j) {
            out << (j ? ", (" : " (");
            for (std::size_t i = 0; i < decl.outcomes[j].size(); ++i)
                out << (i ? ", " : "") << term_text(decl.outcomes[j][i], &decl.ctrl_params);
            out << ")";
        }
        out << ";\n";
        if (!m.real_bat.likelihood[a].rows.empty()) likelihood_text(m, a, m.real_bat.likelihood[a], out, "  ");
        out << "}\n";
    }

    for (FluentId f = 0; f < m.state_fluent_count(); ++f)
        if (!m.real_bat.ssa[f].empty()) out << "\n" << ssa_text(m, f, m.real_bat.ssa[f], "");

    std::ostringstream believed;
    for (ActionId a = 0; a < m.actions.size(); ++a) {
        if (m.actions[a].reserved()) continue;
        const auto& real = m.real_bat.likelihood[a];
        const auto& bel = m.believed_bat.likelihood[a];
        if (table_text(m, a, real) == table_text(m, a, bel)) continue;
        believed << "  likelihood " << m.actions[a].name << " {\n";
        for (const auto& row : bel.rows) {
            believed << "    ";
            if (row.otherwise) believed << "otherwise: ";
            else believed << "when " << formula_text(row.context.root, &m.actions[a].ctrl_params) << ": ";
            for (std::size_t j = 0; j < row.weights.size(); ++j)
                believed << (j ? ", " : "") << term_text(row.weights[j], &m.actions[a].ctrl_params);
            believed << ";\n";
        }
        believed << "  }\n";
    }
    for (FluentId f = 0; f < m.state_fluent_count(); ++f) {
        std::string real = ssa_text(m, f, m.real_bat.ssa[f], "  ");
        std::string bel = ssa_text(m, f, m.believed_bat.ssa[f], "  ");
        if (real != bel) believed << bel;
    }
    if (!believed.str().empty()) out << "\nbelieved {\n" << believed.str() << "}\n";

    if (!m.init.constraints.empty() || !m.init.worlds.empty()) {
        out << "\ninit {\n";
        if (!m.init.constraints.empty()) {
            out << "  constraints:";
            for (std::size_t i = 0; i < m.init.constraints.size(); ++i)
                out << (i ? ", " : " ") << print(m.init.constraints[i]);
            out << ";\n";
        }
        if (!m.init.worlds.empty()) {
            out << "  worlds:";
            for (std::size_t i = 0; i < m.init.worlds.size(); ++i)
                out << (i ? ", " : " ") << print_valuation(m, m.init.worlds[i]);
            out << ";\n";
        }
        out << "}\n";
    }

    if (!m.kb0.empty()) {
        out << "\nbelief {";
        bool first = true;
        for (const auto& [v, p] : m.kb0) {
            out << (first ? " " : ", ") << print_valuation(m, v) << ": " << to_string(p);
            first = false;
        }
        out << " }\n";
    }

    out << "\nprogram {\n";
    std::ostringstream body;
    program_stmts(m, m.program, body, "  ");
    out << body.str() << "}\n";

    for (const auto& prop : m.properties)
        out << "\nproperty " << prop.name << " { " << print_state_formula(prop.formula) << " }\n";
    return out.str();
}

}  // namespace bp
