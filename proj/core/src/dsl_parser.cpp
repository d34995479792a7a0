#include "bp/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace bp {

std::string Diagnostic::to_string() const {
    std::ostringstream out;
    if (line > 0) out << line << ':' << column << ": ";
    out << code << ": " << message;
    return out.str();
}

namespace {

std::string join_messages(const std::vector<Diagnostic>& ds) {
    std::string s;
    for (const auto& d : ds) {
        if (!s.empty()) s += "\n";
        s += d.to_string();
    }
    return s;
}

}  // namespace

ModelError::ModelError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(join_messages(diagnostics)), diagnostics_(std::move(diagnostics)) {}

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { Ident, Number, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    int line = 1;
    int column = 1;
};

[[noreturn]] void fail_at(std::string_view code, const std::string& message, int line, int column) {
    throw ModelError({Diagnostic{std::string(code), message, line, column}});
}

std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    int line = 1;
    int col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    };
    auto is_digit = [&](std::size_t k) { return k < src.size() && std::isdigit(static_cast<unsigned char>(src[k])); };

    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        Token t;
        t.line = line;
        t.column = col;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_' || src[j] == '\''))
                ++j;
            t.kind = Tok::Ident;
            t.text = std::string(src.substr(i, j - i));
            advance(j - i);
        } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && is_digit(i + 1))) {
            std::size_t j = i;
            while (is_digit(j)) ++j;
            bool decimal = false;
            if (j < src.size() && src[j] == '.' && is_digit(j + 1)) {
                decimal = true;
                ++j;
                while (is_digit(j)) ++j;
            }
            // Adjacent "p/q" with an integer numerator is one rational literal.
            if (!decimal && j < src.size() && src[j] == '/' && is_digit(j + 1)) {
                ++j;
                while (is_digit(j)) ++j;
            }
            t.kind = Tok::Number;
            t.text = std::string(src.substr(i, j - i));
            advance(j - i);
        } else {
            static const char* two[] = {"<=", ">=", "!=", "==", "&&", "||", "=>", ".."};
            t.kind = Tok::Punct;
            bool matched = false;
            for (const char* op : two) {
                if (src.substr(i, 2) == op) {
                    t.text = op;
                    advance(2);
                    matched = true;
                    break;
                }
            }
            if (!matched) {
                static const std::string singles = "{}()[],;:=<>+-*/!?|.";
                if (singles.find(c) == std::string::npos)
                    fail_at(diag::kSyntax, std::string("unexpected character '") + c + "'", line, col);
                t.text = std::string(1, c);
                advance(1);
            }
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.kind = Tok::End;
    end.line = line;
    end.column = col;
    out.push_back(end);
    return out;
}

const std::set<std::string>& keywords() {
    static const std::set<std::string> k = {
        "fluents", "action", "stochastic", "sensing", "outcomes", "likelihood", "when", "otherwise", "ssa",
        "case", "default", "believed", "init", "constraints", "worlds", "belief", "program", "property",
        "nil", "test", "if", "then", "elif", "else", "end", "while", "do", "choose", "or", "star",
        "true", "false", "in", "B", "Exp", "Expect", "Conf", "ConfOpen", "P", "X", "F", "G", "U",
        "forall", "exists"};
    return k;
}

// ---------------------------------------------------------------------------
// Parser

enum class TermMode { Objective, Subjective, Rigid };

class Parser {
public:
    Parser(std::string_view text, ModelFile* model) : toks_(tokenize(text)), m_(model) {}

    ModelFile parse_file();

    StatePtr state_formula_entry() {
        auto s = state_formula();
        expect_end();
        return s;
    }
    TracePtr trace_formula_entry() {
        auto t = trace_formula_raw(nullptr);
        expect_end();
        return t;
    }
    FormulaPtr formula_entry(TermMode mode) {
        auto f = formula(mode);
        expect_end();
        return f;
    }
    PrimitiveProgram primitive_entry() {
        const Token& t = expect_ident();
        auto p = primitive_after_name(t);
        if (peek_is(";")) next();
        expect_end();
        return p;
    }
    Valuation valuation_entry() {
        Valuation v;
        if (peek_is("{")) {
            v = valuation();
        } else {
            v = valuation_body(peek());
        }
        expect_end();
        return v;
    }

private:
    // token helpers
    const Token& peek(std::size_t ahead = 0) const {
        std::size_t k = std::min(pos_ + ahead, toks_.size() - 1);
        return toks_[k];
    }
    const Token& next() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    bool peek_is(std::string_view text, std::size_t ahead = 0) const {
        const Token& t = peek(ahead);
        return t.kind != Tok::End && t.kind != Tok::Number && t.text == text;
    }
    bool accept(std::string_view text) {
        if (peek_is(text)) {
            next();
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(std::string_view code, const std::string& message, const Token& at) const {
        fail_at(code, message, at.line, at.column);
    }
    [[noreturn]] void unexpected(const std::string& wanted) const {
        const Token& t = peek();
        std::string got = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
        fail(diag::kSyntax, "expected " + wanted + ", found " + got, t);
    }
    const Token& expect(std::string_view text) {
        if (!peek_is(text)) unexpected("'" + std::string(text) + "'");
        return next();
    }
    const Token& expect_ident() {
        if (peek().kind != Tok::Ident) unexpected("identifier");
        return next();
    }
    void expect_end() {
        if (peek().kind != Tok::End) unexpected("end of input");
    }
    std::string declared_name(std::string_view what) {
        const Token& t = expect_ident();
        if (keywords().count(t.text)) fail(diag::kSyntax, "keyword '" + t.text + "' cannot name a " + std::string(what), t);
        return t.text;
    }

    Rational number_literal() {
        bool neg = false;
        if (accept("-")) neg = true;
        if (peek().kind != Tok::Number) unexpected("number");
        const Token& t = next();
        auto r = parse_rational(t.text);
        if (!r) fail(diag::kSyntax, "malformed number '" + t.text + "'", t);
        return neg ? Rational(-*r) : *r;
    }

    std::size_t integer_literal() {
        if (peek().kind != Tok::Number) unexpected("step bound");
        const Token& t = next();
        auto r = parse_rational(t.text);
        if (!r || r->get_den() != 1 || *r < 0) fail(diag::kSyntax, "step bound must be a non-negative integer", t);
        return r->get_num().get_ui();
    }

    // sections
    void fluents_section();
    void action_section();
    std::vector<TermPtr> outcome_tuple(std::size_t unctrl);
    LikelihoodTable likelihood_block(const ActionDecl& a);
    void ssa_section(BasicActionTheory& bat, bool override_mode);
    void believed_section();
    void init_section();
    void belief_section();
    void program_section();
    void property_section();

    Valuation valuation();
    Valuation valuation_body(const Token& where);

    // terms and formulas
    TermPtr term(TermMode mode);
    TermPtr term_mul(TermMode mode);
    TermPtr term_unary(TermMode mode);
    TermPtr term_primary(TermMode mode);
    FormulaPtr formula(TermMode mode);
    FormulaPtr formula_and(TermMode mode);
    FormulaPtr formula_not(TermMode mode);
    FormulaPtr formula_atom(TermMode mode);
    FormulaPtr comparison(TermMode mode);
    FluentId fluent_ref(const Token& t);

    // programs
    ProgramPtr block(const std::vector<std::string>& terminators);
    ProgramPtr statement();
    PrimitiveProgram primitive_after_name(const Token& name);

    // properties
    StatePtr state_formula();
    StatePtr state_and();
    StatePtr state_not();
    StatePtr state_atom();
    Interval interval();
    TracePtr trace_formula_raw(Interval* flip_target);

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    ModelFile* m_;
    std::vector<std::string> params_;  // current parameter scope (slot order)
    bool fluents_seen_ = false;
    std::set<FluentId> believed_ssa_;
    std::set<ActionId> believed_lik_;
    std::set<std::string> property_names_;
};

// ---------------------------------------------------------------------------

ModelFile Parser::parse_file() {
    while (peek().kind != Tok::End) {
        const Token& t = peek();
        if (t.kind != Tok::Ident) unexpected("section keyword");
        if (t.text != "fluents" && !fluents_seen_)
            fail(diag::kSyntax, "the fluents section must come first", t);
        if (t.text == "fluents") fluents_section();
        else if (t.text == "action") action_section();
        else if (t.text == "ssa") ssa_section(m_->real_bat, false);
        else if (t.text == "believed") believed_section();
        else if (t.text == "init") init_section();
        else if (t.text == "belief") belief_section();
        else if (t.text == "program") program_section();
        else if (t.text == "property") property_section();
        else unexpected("section keyword");
    }
    if (!fluents_seen_) fail_at(diag::kSyntax, "missing fluents section", 1, 1);
    // Whatever the believed block leaves alone mirrors the real theory.
    for (FluentId f = 0; f < m_->fluents.size(); ++f)
        if (!believed_ssa_.count(f)) m_->believed_bat.ssa[f] = m_->real_bat.ssa[f];
    for (ActionId a = 0; a < m_->actions.size(); ++a)
        if (!believed_lik_.count(a)) m_->believed_bat.likelihood[a] = m_->real_bat.likelihood[a];
    return std::move(*m_);
}

void Parser::fluents_section() {
    const Token& kw = expect("fluents");
    if (fluents_seen_) fail(diag::kDuplicate, "fluents declared twice", kw);
    fluents_seen_ = true;
    expect("{");
    std::vector<std::string> names;
    while (!peek_is("}")) {
        const Token& t = peek();
        std::string name = declared_name("fluent");
        if (name == kFinalFluent || name == kFailFluent)
            fail(diag::kReserved, "fluent name '" + name + "' is reserved", t);
        if (std::find(names.begin(), names.end(), name) != names.end())
            fail(diag::kDuplicate, "fluent '" + name + "' declared twice", t);
        if (accept("(")) fail(diag::kArity, "fluent '" + name + "' must be nullary", t);
        names.push_back(name);
        if (!accept(",")) break;
    }
    expect("}");
    // Fluents are declared once up front; actions may only follow.
    for (auto& n : names) m_->fluents.push_back({n, FluentDecl::Role::State});
    inject_reserved(*m_);
    // Reserved actions live at the tail; user actions get inserted before them.
}

void Parser::action_section() {
    expect("action");
    const Token& name_tok = peek();
    std::string name = declared_name("action");
    if (name == kEpsAction || name == kAbortAction)
        fail(diag::kReserved, "action name '" + name + "' is reserved", name_tok);
    if (m_->find_action(name)) fail(diag::kDuplicate, "action '" + name + "' declared twice", name_tok);

    ActionDecl a;
    a.name = name;
    const Token& kind_tok = expect_ident();
    auto param_list = [&](std::vector<std::string>& into, std::initializer_list<std::string_view> stops) {
        while (true) {
            bool stop = false;
            for (auto s : stops) stop = stop || peek_is(s);
            if (stop) break;
            const Token& pt = peek();
            std::string p = declared_name("parameter");
            if (std::find(into.begin(), into.end(), p) != into.end() ||
                std::find(a.ctrl_params.begin(), a.ctrl_params.end(), p) != a.ctrl_params.end())
                fail(diag::kDuplicate, "parameter '" + p + "' repeated", pt);
            if (m_->find_fluent(p)) fail(diag::kDuplicate, "parameter '" + p + "' shadows a fluent", pt);
            into.push_back(p);
            if (!accept(",")) break;
        }
    };
    if (kind_tok.text == "stochastic") {
        a.kind = ActionDecl::Kind::Stochastic;
        expect("(");
        param_list(a.ctrl_params, {";", ")"});
        if (accept(";")) param_list(a.unctrl_params, {")"});
        expect(")");
    } else if (kind_tok.text == "sensing") {
        a.kind = ActionDecl::Kind::Sensing;
        expect("(");
        param_list(a.unctrl_params, {")"});
        expect(")");
    } else {
        fail(diag::kSyntax, "action kind must be 'stochastic' or 'sensing'", kind_tok);
    }

    expect("{");
    params_ = a.ctrl_params;
    bool have_outcomes = false;
    LikelihoodTable table;
    while (!peek_is("}")) {
        if (accept("outcomes")) {
            expect(":");
            if (!peek_is(";")) {
                do {
                    a.outcomes.push_back(outcome_tuple(a.unctrl_params.size()));
                } while (accept(","));
            }
            expect(";");
            have_outcomes = true;
        } else if (peek_is("likelihood")) {
            if (!have_outcomes) fail(diag::kSyntax, "outcomes must be declared before the likelihood table", peek());
            next();
            table = likelihood_block(a);
        } else {
            unexpected("'outcomes' or 'likelihood'");
        }
    }
    expect("}");
    params_.clear();

    // Insert before the reserved eps/fail tail.
    ActionId id = m_->actions.size() - 2;
    m_->actions.insert(m_->actions.begin() + static_cast<std::ptrdiff_t>(id), a);
    for (auto* bat : {&m_->real_bat, &m_->believed_bat}) {
        bat->likelihood.insert(bat->likelihood.begin() + static_cast<std::ptrdiff_t>(id), table);
        for (auto& cases : bat->ssa)
            for (auto& c : cases)
                if (c.action >= id) ++c.action;
    }
    std::set<ActionId> shifted;
    for (ActionId b : believed_lik_) shifted.insert(b >= id ? b + 1 : b);
    believed_lik_ = std::move(shifted);
}

std::vector<TermPtr> Parser::outcome_tuple(std::size_t unctrl) {
    std::vector<TermPtr> values;
    const Token& at = peek();
    if (accept("(")) {
        if (!peek_is(")")) {
            do {
                values.push_back(term(TermMode::Rigid));
            } while (accept(","));
        }
        expect(")");
    } else {
        values.push_back(term(TermMode::Rigid));
    }
    if (values.size() != unctrl)
        fail(diag::kArity,
             "outcome has " + std::to_string(values.size()) + " values, action has " + std::to_string(unctrl) +
                 " uncontrollable parameters",
             at);
    return values;
}

LikelihoodTable Parser::likelihood_block(const ActionDecl& a) {
    LikelihoodTable table;
    expect("{");
    FormulaPtr covered;  // disjunction of earlier contexts
    while (!peek_is("}")) {
        LikelihoodRow row;
        const Token& at = peek();
        if (accept("when")) {
            row.context.root = formula(TermMode::Objective);
        } else if (accept("otherwise")) {
            row.otherwise = true;
            row.context.root = covered ? make_not(covered) : make_true();
        } else {
            unexpected("'when' or 'otherwise'");
        }
        expect(":");
        do {
            row.weights.push_back(term(TermMode::Rigid));
        } while (accept(","));
        expect(";");
        if (row.weights.size() != a.outcomes.size())
            fail(diag::kArity,
                 "likelihood row has " + std::to_string(row.weights.size()) + " weights for " +
                     std::to_string(a.outcomes.size()) + " outcomes",
                 at);
        if (!row.otherwise) covered = covered ? make_or(covered, row.context.root) : row.context.root;
        bool was_otherwise = row.otherwise;
        table.rows.push_back(std::move(row));
        if (was_otherwise && !peek_is("}")) fail(diag::kSyntax, "'otherwise' must be the last likelihood row", peek());
    }
    expect("}");
    return table;
}

void Parser::ssa_section(BasicActionTheory& bat, bool override_mode) {
    expect("ssa");
    const Token& ft = expect_ident();
    auto fid = m_->find_fluent(ft.text);
    if (!fid) fail(diag::kUndeclared, "undeclared fluent '" + ft.text + "'", ft);
    if (*fid >= m_->state_fluent_count())
        fail(diag::kReserved, "successor-state axioms for '" + ft.text + "' are built in", ft);
    std::vector<SsaCase> cases;
    expect("{");
    while (!peek_is("}")) {
        if (accept("default")) {
            expect(":");
            const Token& d = expect_ident();
            if (d.text != ft.text)
                fail(diag::kSyntax, "the default of ssa " + ft.text + " must be the fluent itself (frame axiom)", d);
            expect(";");
            continue;
        }
        expect("case");
        const Token& at = expect_ident();
        auto aid = m_->find_action(at.text);
        if (!aid) fail(diag::kUndeclared, "undeclared action '" + at.text + "'", at);
        const ActionDecl& decl = m_->actions[*aid];
        if (decl.reserved()) fail(diag::kReserved, "reserved action '" + at.text + "' has a built-in effect", at);
        if (decl.kind == ActionDecl::Kind::Sensing)
            fail(diag::kSensingSsa, "sensing action '" + at.text + "' cannot change fluents", at);
        for (const auto& c : cases)
            if (c.action == *aid) fail(diag::kDuplicate, "two cases for action '" + at.text + "'", at);
        std::vector<std::string> names;
        expect("(");
        if (!peek_is(")")) {
            do {
                names.push_back(declared_name("parameter"));
            } while (accept(","));
        }
        expect(")");
        std::size_t arity = decl.controllable_arity() + decl.uncontrollable_arity();
        if (names.size() != arity)
            fail(diag::kArity,
                 "action '" + at.text + "' takes " + std::to_string(arity) + " parameters, case binds " +
                     std::to_string(names.size()),
                 at);
        expect(":");
        params_ = names;
        TermPtr effect = term(TermMode::Objective);
        params_.clear();
        expect(";");
        cases.push_back({*aid, effect});
    }
    expect("}");
    if (!override_mode && !bat.ssa[*fid].empty())
        fail(diag::kDuplicate, "ssa for '" + ft.text + "' given twice", ft);
    if (override_mode && !believed_ssa_.insert(*fid).second)
        fail(diag::kDuplicate, "believed ssa for '" + ft.text + "' given twice", ft);
    bat.ssa[*fid] = std::move(cases);
}

void Parser::believed_section() {
    expect("believed");
    expect("{");
    while (!peek_is("}")) {
        if (peek_is("ssa")) {
            ssa_section(m_->believed_bat, true);
        } else if (accept("likelihood")) {
            const Token& at = expect_ident();
            auto aid = m_->find_action(at.text);
            if (!aid) fail(diag::kUndeclared, "undeclared action '" + at.text + "'", at);
            const ActionDecl& decl = m_->actions[*aid];
            if (decl.reserved()) fail(diag::kReserved, "reserved action '" + at.text + "' has fixed likelihood", at);
            if (!believed_lik_.insert(*aid).second)
                fail(diag::kDuplicate, "believed likelihood for '" + at.text + "' given twice", at);
            params_ = decl.ctrl_params;
            m_->believed_bat.likelihood[*aid] = likelihood_block(decl);
            params_.clear();
        } else {
            unexpected("'ssa' or 'likelihood'");
        }
    }
    expect("}");
}

Valuation Parser::valuation() {
    const Token& open = expect("{");
    Valuation v = valuation_body(open);
    expect("}");
    return v;
}

Valuation Parser::valuation_body(const Token& where) {
    Valuation v(m_->fluents.size(), Rational(0));
    std::vector<bool> seen(m_->fluents.size(), false);
    while (peek().kind == Tok::Ident) {
        const Token& ft = next();
        auto fid = m_->find_fluent(ft.text);
        if (!fid) fail(diag::kUndeclared, "undeclared fluent '" + ft.text + "'", ft);
        if (*fid >= m_->state_fluent_count())
            fail(diag::kReserved, "reserved fluent '" + ft.text + "' starts at 0 and cannot be set", ft);
        if (seen[*fid]) fail(diag::kDuplicate, "fluent '" + ft.text + "' assigned twice", ft);
        seen[*fid] = true;
        expect("=");
        v[*fid] = number_literal();
        if (!accept(",")) break;
    }
    for (std::size_t i = 0; i < m_->state_fluent_count(); ++i)
        if (!seen[i]) fail(diag::kValuation, "valuation does not assign fluent '" + m_->fluents[i].name + "'", where);
    return v;
}

void Parser::init_section() {
    expect("init");
    expect("{");
    while (!peek_is("}")) {
        if (accept("constraints")) {
            expect(":");
            if (!peek_is(";")) {
                do {
                    m_->init.constraints.push_back(FluentFormula{formula(TermMode::Objective)});
                } while (accept(","));
            }
            expect(";");
        } else if (accept("worlds")) {
            expect(":");
            if (!peek_is(";")) {
                do {
                    m_->init.worlds.push_back(valuation());
                } while (accept(","));
            }
            expect(";");
        } else {
            unexpected("'constraints' or 'worlds'");
        }
    }
    expect("}");
}

void Parser::belief_section() {
    const Token& kw = expect("belief");
    if (!m_->kb0.empty()) fail(diag::kDuplicate, "belief given twice", kw);
    expect("{");
    while (!peek_is("}")) {
        const Token& at = peek();
        Valuation v = valuation();
        expect(":");
        Rational w = number_literal();
        if (m_->kb0.count(v)) fail(diag::kDuplicate, "valuation listed twice in belief", at);
        m_->kb0.emplace(std::move(v), std::move(w));
        if (!accept(",")) break;
    }
    expect("}");
}

void Parser::program_section() {
    expect("program");
    expect("{");
    m_->program = block({"}"});
    expect("}");
}

void Parser::property_section() {
    expect("property");
    const Token& nt = peek();
    std::string name = declared_name("property");
    if (!property_names_.insert(name).second) fail(diag::kDuplicate, "property '" + name + "' defined twice", nt);
    expect("{");
    StatePtr s = state_formula();
    expect("}");
    m_->properties.push_back({name, s});
}

// ---------------------------------------------------------------------------
// Terms

FluentId Parser::fluent_ref(const Token& t) {
    auto fid = m_->find_fluent(t.text);
    if (!fid) fail(diag::kUndeclared, "undeclared fluent '" + t.text + "'", t);
    return *fid;
}

TermPtr Parser::term(TermMode mode) {
    TermPtr lhs = term_mul(mode);
    while (peek_is("+") || peek_is("-")) {
        auto kind = next().text == "+" ? Term::Kind::Add : Term::Kind::Sub;
        lhs = make_binary(kind, lhs, term_mul(mode));
    }
    return lhs;
}

TermPtr Parser::term_mul(TermMode mode) {
    TermPtr lhs = term_unary(mode);
    while (peek_is("*") || peek_is("/")) {
        auto kind = next().text == "*" ? Term::Kind::Mul : Term::Kind::Div;
        lhs = make_binary(kind, lhs, term_unary(mode));
    }
    return lhs;
}

TermPtr Parser::term_unary(TermMode mode) {
    if (accept("-")) {
        if (peek().kind == Tok::Number) {
            const Token& t = next();
            auto r = parse_rational(t.text);
            if (!r) fail(diag::kSyntax, "malformed number '" + t.text + "'", t);
            return make_const(-*r);
        }
        return make_neg(term_unary(mode));
    }
    return term_primary(mode);
}

TermPtr Parser::term_primary(TermMode mode) {
    const Token& t = peek();
    if (t.kind == Tok::Number) {
        next();
        auto r = parse_rational(t.text);
        if (!r) fail(diag::kSyntax, "malformed number '" + t.text + "'", t);
        return make_const(*r);
    }
    if (accept("(")) {
        TermPtr inner = term(mode);
        expect(")");
        return inner;
    }
    if (t.kind != Tok::Ident) unexpected("term");
    if (t.text == "forall" || t.text == "exists")
        fail(diag::kQuantifier, "quantified formulas are not supported", t);

    if (t.text == "B" || t.text == "Exp" || t.text == "Expect" || t.text == "Conf" || t.text == "ConfOpen") {
        if (mode != TermMode::Subjective)
            fail(diag::kSort, "belief operator '" + t.text + "' is only allowed in subjective formulas", t);
        next();
        expect("(");
        TermPtr out;
        if (t.text == "B") {
            auto saved = params_;
            params_.clear();
            out = make_bel(formula(TermMode::Objective));
            params_ = saved;
        } else {
            const Token& ft = expect_ident();
            FluentId fid = fluent_ref(ft);
            if (t.text == "Exp" || t.text == "Expect") {
                out = make_expect(fid, ft.text);
            } else {
                expect(",");
                Rational radius = number_literal();
                out = make_conf(fid, ft.text, radius, t.text == "ConfOpen");
            }
        }
        expect(")");
        return out;
    }

    if (t.text == "if") {
        if (mode != TermMode::Objective) fail(diag::kSort, "piecewise terms read fluents; not allowed here", t);
        next();
        std::vector<FormulaPtr> guards;
        std::vector<TermPtr> values;
        guards.push_back(formula(mode));
        expect("then");
        values.push_back(term(mode));
        while (accept("elif")) {
            guards.push_back(formula(mode));
            expect("then");
            values.push_back(term(mode));
        }
        expect("else");
        TermPtr otherwise = term(mode);
        expect("end");
        return make_cases(std::move(guards), std::move(values), std::move(otherwise));
    }

    if (keywords().count(t.text)) unexpected("term");
    next();
    if (auto it = std::find(params_.begin(), params_.end(), t.text); it != params_.end())
        return make_param(static_cast<std::size_t>(it - params_.begin()), t.text);
    auto fid = m_->find_fluent(t.text);
    if (!fid) fail(diag::kUndeclared, "undeclared identifier '" + t.text + "'", t);
    if (mode == TermMode::Subjective)
        fail(diag::kSort, "fluent '" + t.text + "' read outside a belief operator", t);
    if (mode == TermMode::Rigid) fail(diag::kSort, "fluent '" + t.text + "' in a rigid term", t);
    if (peek_is("(")) fail(diag::kArity, "fluent '" + t.text + "' is nullary", peek());
    return make_fluent(*fid, t.text);
}

// ---------------------------------------------------------------------------
// Formulas

FormulaPtr Parser::formula(TermMode mode) {
    FormulaPtr lhs = formula_and(mode);
    while (accept("||")) lhs = make_or(lhs, formula_and(mode));
    return lhs;
}

FormulaPtr Parser::formula_and(TermMode mode) {
    FormulaPtr lhs = formula_not(mode);
    while (accept("&&")) lhs = make_and(lhs, formula_not(mode));
    return lhs;
}

FormulaPtr Parser::formula_not(TermMode mode) {
    if (accept("!")) return make_not(formula_not(mode));
    return formula_atom(mode);
}

FormulaPtr Parser::formula_atom(TermMode mode) {
    const Token& t = peek();
    if (t.kind == Tok::Ident && (t.text == "forall" || t.text == "exists"))
        fail(diag::kQuantifier, "quantified formulas are not supported", t);
    if (t.kind == Tok::Ident && t.text == "true" ) {
        next();
        return make_true();
    }
    if (t.kind == Tok::Ident && t.text == "false") {
        next();
        return make_false();
    }
    if (peek_is("(")) {
        // Either a parenthesised formula or a parenthesised term that starts
        // a comparison; try the formula reading first.
        std::size_t saved = pos_;
        try {
            next();
            FormulaPtr inner = formula(mode);
            expect(")");
            static const std::set<std::string> follow = {"=", "==", "!=", "<", "<=", ">", ">=", "+", "-", "*", "/", "in"};
            if (!follow.count(peek().text) || peek().kind == Tok::Number) return inner;
        } catch (const ModelError& e) {
            if (!e.diagnostics().empty() && e.diagnostics().front().code != diag::kSyntax) throw;
        }
        pos_ = saved;
    }
    return comparison(mode);
}

FormulaPtr Parser::comparison(TermMode mode) {
    TermPtr lhs = term(mode);
    const Token& op = peek();
    if (op.kind == Tok::Ident && op.text == "in") {
        next();
        expect("{");
        FormulaPtr out;
        do {
            auto eq = make_cmp(CmpOp::Eq, lhs, term(mode));
            out = out ? make_or(out, eq) : eq;
        } while (accept(","));
        expect("}");
        return out;
    }
    CmpOp cmp;
    if (op.text == "=" || op.text == "==") cmp = CmpOp::Eq;
    else if (op.text == "!=") cmp = CmpOp::Ne;
    else if (op.text == "<") cmp = CmpOp::Lt;
    else if (op.text == "<=") cmp = CmpOp::Le;
    else if (op.text == ">") cmp = CmpOp::Gt;
    else if (op.text == ">=") cmp = CmpOp::Ge;
    else unexpected("comparison operator");
    next();
    return make_cmp(cmp, lhs, term(mode));
}

// ---------------------------------------------------------------------------
// Programs

ProgramPtr Parser::block(const std::vector<std::string>& terminators) {
    std::vector<ProgramPtr> stmts;
    auto at_terminator = [&] {
        if (peek().kind == Tok::End) return true;
        for (const auto& t : terminators)
            if (peek_is(t)) return true;
        return false;
    };
    while (!at_terminator()) stmts.push_back(statement());
    if (stmts.empty()) return make_nil();
    ProgramPtr out = stmts.back();
    for (std::size_t i = stmts.size() - 1; i-- > 0;) out = make_seq(stmts[i], out);
    return out;
}

ProgramPtr Parser::statement() {
    const Token& t = peek();
    if (accept("{")) {
        ProgramPtr inner = block({"}"});
        expect("}");
        return inner;
    }
    if (t.kind != Tok::Ident) unexpected("statement");
    if (t.text == "nil") {
        next();
        expect(";");
        return make_nil();
    }
    if (t.text == "test") {
        next();
        SubjectiveFormula a{formula(TermMode::Subjective)};
        expect(";");
        return make_test(a);
    }
    if (t.text == "if") {
        next();
        SubjectiveFormula cond{formula(TermMode::Subjective)};
        expect("then");
        ProgramPtr then_branch = block({"else", "end"});
        ProgramPtr else_branch = make_nil();
        if (accept("else")) else_branch = block({"end"});
        expect("end");
        return make_choice(make_seq(make_test(cond), then_branch),
                           make_seq(make_test(SubjectiveFormula{make_not(cond.root)}), else_branch));
    }
    if (t.text == "while") {
        next();
        SubjectiveFormula cond{formula(TermMode::Subjective)};
        expect("do");
        ProgramPtr body = block({"end"});
        expect("end");
        return make_seq(make_star(make_seq(make_test(cond), body)),
                        make_test(SubjectiveFormula{make_not(cond.root)}));
    }
    if (t.text == "choose") {
        next();
        std::vector<ProgramPtr> branches;
        expect("{");
        branches.push_back(block({"}"}));
        expect("}");
        while (accept("or")) {
            expect("{");
            branches.push_back(block({"}"}));
            expect("}");
        }
        if (branches.size() < 2) fail(diag::kSyntax, "choose needs at least two branches", t);
        ProgramPtr out = branches.back();
        for (std::size_t i = branches.size() - 1; i-- > 0;) out = make_choice(branches[i], out);
        return out;
    }
    if (t.text == "star") {
        next();
        expect("{");
        ProgramPtr body = block({"}"});
        expect("}");
        return make_star(body);
    }
    if (t.text == "pick" )
        fail(diag::kSyntax, "nondeterministic parameter pick is not supported", t);
    if (keywords().count(t.text)) unexpected("statement");
    next();
    auto p = primitive_after_name(t);
    expect(";");
    return make_prim(std::move(p));
}

PrimitiveProgram Parser::primitive_after_name(const Token& name) {
    if (name.text == kEpsAction || name.text == kAbortAction)
        fail(diag::kReserved, "reserved action '" + name.text + "' cannot occur in a program", name);
    auto aid = m_->find_action(name.text);
    if (!aid) fail(diag::kUndeclared, "undeclared action '" + name.text + "'", name);
    PrimitiveProgram p;
    p.action = *aid;
    if (accept("(")) {
        if (!peek_is(")")) {
            do {
                p.ctrl.push_back(number_literal());
            } while (accept(","));
        }
        expect(")");
    }
    std::size_t want = m_->actions[*aid].controllable_arity();
    if (p.ctrl.size() != want)
        fail(diag::kArity,
             "primitive program '" + name.text + "' takes " + std::to_string(want) +
                 " controllable arguments, got " + std::to_string(p.ctrl.size()),
             name);
    return p;
}

// ---------------------------------------------------------------------------
// Properties

namespace {

bool has_prob(const StatePtr& s) {
    if (s->kind == StateFormula::Kind::Prob) return true;
    for (const auto& a : s->args)
        if (has_prob(a)) return true;
    return false;
}

FormulaPtr to_subjective(const StatePtr& s) {
    switch (s->kind) {
        case StateFormula::Kind::Subj:
            return s->beta.root;
        case StateFormula::Kind::Not:
            return make_not(to_subjective(s->args[0]));
        case StateFormula::Kind::And:
            return make_and(to_subjective(s->args[0]), to_subjective(s->args[1]));
        case StateFormula::Kind::Or:
            return make_or(to_subjective(s->args[0]), to_subjective(s->args[1]));
        default:
            return nullptr;
    }
}

StatePtr make_state(StateFormula::Kind kind, std::vector<StatePtr> args) {
    auto s = std::make_shared<StateFormula>();
    s->kind = kind;
    s->args = std::move(args);
    return s;
}

// Folds P-free subtrees into single subjective leaves.
StatePtr collapse(const StatePtr& s) {
    if (!has_prob(s)) {
        auto leaf = std::make_shared<StateFormula>();
        leaf->kind = StateFormula::Kind::Subj;
        leaf->beta.root = to_subjective(s);
        return leaf;
    }
    if (s->kind == StateFormula::Kind::Prob) return s;
    std::vector<StatePtr> args;
    for (const auto& a : s->args) args.push_back(collapse(a));
    return make_state(s->kind, std::move(args));
}

}  // namespace

StatePtr Parser::state_formula() {
    StatePtr lhs = state_and();
    while (accept("||")) lhs = make_state(StateFormula::Kind::Or, {lhs, state_and()});
    return collapse(lhs);
}

StatePtr Parser::state_and() {
    StatePtr lhs = state_not();
    while (accept("&&")) lhs = make_state(StateFormula::Kind::And, {lhs, state_not()});
    return lhs;
}

StatePtr Parser::state_not() {
    if (accept("!")) return make_state(StateFormula::Kind::Not, {state_not()});
    return state_atom();
}

Interval Parser::interval() {
    Interval iv;
    const Token& t = peek();
    auto bound = [&] {
        Rational r = number_literal();
        if (r < 0 || r > 1) fail(diag::kSyntax, "probability bound outside [0,1]", t);
        return r;
    };
    if (accept(">=")) {
        iv.lo = bound();
    } else if (accept(">")) {
        iv.lo = bound();
        iv.lo_closed = false;
    } else if (accept("<=")) {
        iv.hi = bound();
    } else if (accept("<")) {
        iv.hi = bound();
        iv.hi_closed = false;
    } else if (accept("=")) {
        iv.lo = iv.hi = bound();
    } else if (peek_is("[") || peek_is("(")) {
        iv.lo_closed = next().text == "[";
        iv.lo = bound();
        expect(",");
        iv.hi = bound();
        if (peek_is("]") || peek_is(")")) iv.hi_closed = next().text == "]";
        else unexpected("']' or ')'");
        if (iv.lo > iv.hi) fail(diag::kSyntax, "empty probability interval", t);
    } else {
        unexpected("probability bound");
    }
    return iv;
}

StatePtr Parser::state_atom() {
    const Token& t = peek();
    if (t.kind == Tok::Ident && t.text == "P") {
        next();
        auto s = std::make_shared<StateFormula>();
        s->kind = StateFormula::Kind::Prob;
        s->interval = interval();
        expect("[");
        s->trace = trace_formula_raw(&s->interval);
        expect("]");
        return s;
    }
    if (peek_is("(")) {
        std::size_t saved = pos_;
        try {
            next();
            StatePtr inner = state_formula();
            expect(")");
            static const std::set<std::string> follow = {"=", "==", "!=", "<", "<=", ">", ">=", "+", "-", "*", "/", "in"};
            if (!follow.count(peek().text) || peek().kind == Tok::Number) return inner;
        } catch (const ModelError& e) {
            if (!e.diagnostics().empty() && e.diagnostics().front().code != diag::kSyntax) throw;
        }
        pos_ = saved;
    }
    auto leaf = std::make_shared<StateFormula>();
    leaf->kind = StateFormula::Kind::Subj;
    leaf->beta.root = formula_atom(TermMode::Subjective);
    return leaf;
}

TracePtr Parser::trace_formula_raw(Interval* flip_target) {
    auto tr = std::make_shared<TraceFormula>();
    auto true_leaf = [] {
        auto s = std::make_shared<StateFormula>();
        s->kind = StateFormula::Kind::Subj;
        s->beta.root = make_true();
        return StatePtr(s);
    };
    auto optional_bound = [&](TraceFormula& into) {
        if (accept("<=")) {
            into.kind = TraceFormula::Kind::BoundedUntil;
            into.bound = integer_literal();
        } else {
            into.kind = TraceFormula::Kind::Until;
        }
    };
    const Token& t = peek();
    if (t.kind == Tok::Ident && t.text == "X") {
        next();
        tr->kind = TraceFormula::Kind::Next;
        tr->rhs = state_formula();
        return tr;
    }
    if (t.kind == Tok::Ident && t.text == "F") {
        next();
        optional_bound(*tr);
        tr->lhs = true_leaf();
        tr->rhs = state_formula();
        return tr;
    }
    if (t.kind == Tok::Ident && t.text == "G") {
        // P_I[G phi] is P_{1-I}[F !phi].
        if (!flip_target) fail(diag::kSyntax, "G is only supported directly under P", t);
        next();
        optional_bound(*tr);
        tr->lhs = true_leaf();
        tr->rhs = collapse(make_state(StateFormula::Kind::Not, {state_formula()}));
        Interval flipped;
        flipped.lo = Rational(1) - flip_target->hi;
        flipped.hi = Rational(1) - flip_target->lo;
        flipped.lo_closed = flip_target->hi_closed;
        flipped.hi_closed = flip_target->lo_closed;
        *flip_target = flipped;
        return tr;
    }
    tr->lhs = state_formula();
    const Token& u = peek();
    if (!(u.kind == Tok::Ident && u.text == "U")) unexpected("'U'");
    next();
    optional_bound(*tr);
    tr->rhs = state_formula();
    return tr;
}

}  // namespace

ModelFile parse_model(std::string_view text) {
    ModelFile m;
    Parser p(text, &m);
    return p.parse_file();
}

ModelFile load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError({Diagnostic{"E-IO", "cannot open '" + path + "'", 0, 0}});
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

StatePtr parse_state_formula(const ModelFile& m, std::string_view text) {
    ModelFile copy = m;
    Parser p(text, &copy);
    return p.state_formula_entry();
}

TracePtr parse_trace_formula(const ModelFile& m, std::string_view text) {
    ModelFile copy = m;
    Parser p(text, &copy);
    return p.trace_formula_entry();
}

SubjectiveFormula parse_subjective_formula(const ModelFile& m, std::string_view text) {
    ModelFile copy = m;
    Parser p(text, &copy);
    return SubjectiveFormula{p.formula_entry(TermMode::Subjective)};
}

FluentFormula parse_fluent_formula(const ModelFile& m, std::string_view text) {
    ModelFile copy = m;
    Parser p(text, &copy);
    return FluentFormula{p.formula_entry(TermMode::Objective)};
}

PrimitiveProgram parse_primitive(const ModelFile& m, std::string_view text) {
    ModelFile copy = m;
    Parser p(text, &copy);
    return p.primitive_entry();
}

Valuation parse_valuation(const ModelFile& m, std::string_view text) {
    ModelFile copy = m;
    Parser p(text, &copy);
    return p.valuation_entry();
}

}  // namespace bp
