#include "bp/ast.hpp"

#include <algorithm>

namespace bp {

namespace {

std::shared_ptr<Term> new_term(Term::Kind kind) {
    auto t = std::make_shared<Term>();
    t->kind = kind;
    return t;
}

std::shared_ptr<Formula> new_formula(Formula::Kind kind) {
    auto f = std::make_shared<Formula>();
    f->kind = kind;
    return f;
}

template <class Ptr>
bool equal_lists(const std::vector<Ptr>& a, const std::vector<Ptr>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!equal(a[i], b[i])) return false;
    return true;
}

}  // namespace

TermPtr make_const(Rational value) {
    auto t = new_term(Term::Kind::Const);
    t->value = std::move(value);
    return t;
}

TermPtr make_fluent(FluentId id, std::string name) {
    auto t = new_term(Term::Kind::Fluent);
    t->index = id;
    t->name = std::move(name);
    return t;
}

TermPtr make_param(std::size_t slot, std::string name) {
    auto t = new_term(Term::Kind::Param);
    t->index = slot;
    t->name = std::move(name);
    return t;
}

TermPtr make_binary(Term::Kind kind, TermPtr lhs, TermPtr rhs) {
    auto t = new_term(kind);
    t->args = {std::move(lhs), std::move(rhs)};
    return t;
}

TermPtr make_neg(TermPtr operand) {
    auto t = new_term(Term::Kind::Neg);
    t->args = {std::move(operand)};
    return t;
}

TermPtr make_cases(std::vector<FormulaPtr> guards, std::vector<TermPtr> values, TermPtr otherwise) {
    auto t = new_term(Term::Kind::Cases);
    t->guards = std::move(guards);
    t->args = std::move(values);
    t->args.push_back(std::move(otherwise));
    return t;
}

TermPtr make_bel(FormulaPtr phi) {
    auto t = new_term(Term::Kind::Bel);
    t->guards = {std::move(phi)};
    return t;
}

TermPtr make_expect(FluentId id, std::string name) {
    auto t = new_term(Term::Kind::Expect);
    t->index = id;
    t->name = std::move(name);
    return t;
}

TermPtr make_conf(FluentId id, std::string name, Rational radius, bool strict) {
    auto t = new_term(Term::Kind::Conf);
    t->index = id;
    t->name = std::move(name);
    t->value = std::move(radius);
    t->strict = strict;
    return t;
}

FormulaPtr make_true() {
    static const FormulaPtr t = new_formula(Formula::Kind::True);
    return t;
}

FormulaPtr make_false() {
    static const FormulaPtr f = new_formula(Formula::Kind::False);
    return f;
}

FormulaPtr make_cmp(CmpOp op, TermPtr lhs, TermPtr rhs) {
    auto f = new_formula(Formula::Kind::Cmp);
    f->op = op;
    f->lhs = std::move(lhs);
    f->rhs = std::move(rhs);
    return f;
}

FormulaPtr make_not(FormulaPtr a) {
    auto f = new_formula(Formula::Kind::Not);
    f->args = {std::move(a)};
    return f;
}

FormulaPtr make_and(FormulaPtr a, FormulaPtr b) {
    auto f = new_formula(Formula::Kind::And);
    f->args = {std::move(a), std::move(b)};
    return f;
}

FormulaPtr make_or(FormulaPtr a, FormulaPtr b) {
    auto f = new_formula(Formula::Kind::Or);
    f->args = {std::move(a), std::move(b)};
    return f;
}

bool equal(const Term& a, const Term& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Term::Kind::Const:
            return a.value == b.value;
        case Term::Kind::Fluent:
        case Term::Kind::Param:
        case Term::Kind::Expect:
            return a.index == b.index;
        case Term::Kind::Conf:
            return a.index == b.index && a.value == b.value && a.strict == b.strict;
        default:
            return equal_lists(a.args, b.args) && equal_lists(a.guards, b.guards);
    }
}

bool equal(const Formula& a, const Formula& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == Formula::Kind::Cmp)
        return a.op == b.op && equal(a.lhs, b.lhs) && equal(a.rhs, b.rhs);
    return equal_lists(a.args, b.args);
}

bool equal(const TermPtr& a, const TermPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    return equal(*a, *b);
}

bool equal(const FormulaPtr& a, const FormulaPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    return equal(*a, *b);
}

TermPtr bind_params(const TermPtr& t, const std::vector<Rational>& args) {
    if (!t) return t;
    if (t->kind == Term::Kind::Param) {
        if (t->index < args.size()) return make_const(args[t->index]);
        return t;
    }
    if (t->args.empty() && t->guards.empty()) return t;
    auto copy = std::make_shared<Term>(*t);
    for (auto& a : copy->args) a = bind_params(a, args);
    for (auto& g : copy->guards) g = bind_params(g, args);
    return copy;
}

FormulaPtr bind_params(const FormulaPtr& f, const std::vector<Rational>& args) {
    if (!f) return f;
    if (f->kind == Formula::Kind::True || f->kind == Formula::Kind::False) return f;
    auto copy = std::make_shared<Formula>(*f);
    copy->lhs = bind_params(f->lhs, args);
    copy->rhs = bind_params(f->rhs, args);
    for (auto& a : copy->args) a = bind_params(a, args);
    return copy;
}

bool is_rigid(const TermPtr& t) {
    if (!t) return true;
    switch (t->kind) {
        case Term::Kind::Fluent:
        case Term::Kind::Bel:
        case Term::Kind::Expect:
        case Term::Kind::Conf:
        case Term::Kind::Cases:  // guards are fluent formulas
            return false;
        default:
            return std::all_of(t->args.begin(), t->args.end(), [](const TermPtr& a) { return is_rigid(a); });
    }
}

bool mentions_params(const TermPtr& t) {
    if (!t) return false;
    if (t->kind == Term::Kind::Param) return true;
    for (const auto& a : t->args)
        if (mentions_params(a)) return true;
    for (const auto& g : t->guards)
        if (mentions_params(g)) return true;
    return false;
}

bool mentions_params(const FormulaPtr& f) {
    if (!f) return false;
    if (mentions_params(f->lhs) || mentions_params(f->rhs)) return true;
    for (const auto& a : f->args)
        if (mentions_params(a)) return true;
    return false;
}

bool operator==(const PrimitiveProgram& a, const PrimitiveProgram& b) {
    return a.action == b.action && a.ctrl == b.ctrl;
}

bool operator<(const PrimitiveProgram& a, const PrimitiveProgram& b) {
    if (a.action != b.action) return a.action < b.action;
    return a.ctrl < b.ctrl;
}

namespace {

std::shared_ptr<Program> new_program(Program::Kind kind) {
    auto p = std::make_shared<Program>();
    p->kind = kind;
    return p;
}

}  // namespace

ProgramPtr make_nil() {
    static const ProgramPtr nil = new_program(Program::Kind::Nil);
    return nil;
}

ProgramPtr make_prim(PrimitiveProgram prim) {
    auto p = new_program(Program::Kind::Prim);
    p->prim = std::move(prim);
    return p;
}

ProgramPtr make_test(SubjectiveFormula alpha) {
    auto p = new_program(Program::Kind::Test);
    p->test = std::move(alpha);
    return p;
}

ProgramPtr make_seq(ProgramPtr a, ProgramPtr b) {
    auto p = new_program(Program::Kind::Seq);
    p->first = std::move(a);
    p->second = std::move(b);
    return p;
}

ProgramPtr make_choice(ProgramPtr a, ProgramPtr b) {
    auto p = new_program(Program::Kind::Choice);
    p->first = std::move(a);
    p->second = std::move(b);
    return p;
}

ProgramPtr make_star(ProgramPtr body) {
    auto p = new_program(Program::Kind::Star);
    p->first = std::move(body);
    return p;
}

bool equal(const ProgramPtr& a, const ProgramPtr& b) {
    if (a == b) return true;
    if (!a || !b || a->kind != b->kind) return false;
    switch (a->kind) {
        case Program::Kind::Nil:
            return true;
        case Program::Kind::Prim:
            return a->prim == b->prim;
        case Program::Kind::Test:
            return a->test == b->test;
        case Program::Kind::Star:
            return equal(a->first, b->first);
        default:
            return equal(a->first, b->first) && equal(a->second, b->second);
    }
}

bool Interval::contains(const Rational& p) const {
    bool above = lo_closed ? p >= lo : p > lo;
    bool below = hi_closed ? p <= hi : p < hi;
    return above && below;
}

bool Interval::operator==(const Interval& o) const {
    return lo == o.lo && hi == o.hi && lo_closed == o.lo_closed && hi_closed == o.hi_closed;
}

bool equal(const StatePtr& a, const StatePtr& b) {
    if (a == b) return true;
    if (!a || !b || a->kind != b->kind) return false;
    switch (a->kind) {
        case StateFormula::Kind::Subj:
            return a->beta == b->beta;
        case StateFormula::Kind::Prob:
            return a->interval == b->interval && equal(a->trace, b->trace);
        default:
            return equal_lists(a->args, b->args);
    }
}

bool equal(const TracePtr& a, const TracePtr& b) {
    if (a == b) return true;
    if (!a || !b || a->kind != b->kind) return false;
    return a->bound == b->bound && equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
}

std::optional<FluentId> ModelFile::find_fluent(std::string_view name) const {
    for (std::size_t i = 0; i < fluents.size(); ++i)
        if (fluents[i].name == name) return i;
    return std::nullopt;
}

std::optional<ActionId> ModelFile::find_action(std::string_view name) const {
    for (std::size_t i = 0; i < actions.size(); ++i)
        if (actions[i].name == name) return i;
    return std::nullopt;
}

const NamedProperty* ModelFile::find_property(std::string_view name) const {
    for (const auto& p : properties)
        if (p.name == name) return &p;
    return nullptr;
}

namespace {

bool equal_tables(const LikelihoodTable& a, const LikelihoodTable& b) {
    if (a.rows.size() != b.rows.size()) return false;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        const auto& ra = a.rows[i];
        const auto& rb = b.rows[i];
        if (ra.otherwise != rb.otherwise || !(ra.context == rb.context) || !equal_lists(ra.weights, rb.weights))
            return false;
    }
    return true;
}

bool equal_bats(const BasicActionTheory& a, const BasicActionTheory& b) {
    if (a.ssa.size() != b.ssa.size() || a.likelihood.size() != b.likelihood.size()) return false;
    for (std::size_t f = 0; f < a.ssa.size(); ++f) {
        if (a.ssa[f].size() != b.ssa[f].size()) return false;
        for (std::size_t i = 0; i < a.ssa[f].size(); ++i)
            if (a.ssa[f][i].action != b.ssa[f][i].action || !equal(a.ssa[f][i].effect, b.ssa[f][i].effect))
                return false;
    }
    for (std::size_t i = 0; i < a.likelihood.size(); ++i)
        if (!equal_tables(a.likelihood[i], b.likelihood[i])) return false;
    return true;
}

bool equal_actions(const ActionDecl& a, const ActionDecl& b) {
    if (a.name != b.name || a.kind != b.kind || a.ctrl_params != b.ctrl_params || a.unctrl_params != b.unctrl_params)
        return false;
    if (a.outcomes.size() != b.outcomes.size()) return false;
    for (std::size_t j = 0; j < a.outcomes.size(); ++j)
        if (!equal_lists(a.outcomes[j], b.outcomes[j])) return false;
    return true;
}

}  // namespace

bool operator==(const ModelFile& a, const ModelFile& b) {
    if (a.fluents.size() != b.fluents.size() || a.actions.size() != b.actions.size()) return false;
    for (std::size_t i = 0; i < a.fluents.size(); ++i)
        if (a.fluents[i].name != b.fluents[i].name || a.fluents[i].role != b.fluents[i].role) return false;
    for (std::size_t i = 0; i < a.actions.size(); ++i)
        if (!equal_actions(a.actions[i], b.actions[i])) return false;
    if (!equal_bats(a.real_bat, b.real_bat) || !equal_bats(a.believed_bat, b.believed_bat)) return false;
    if (a.init.worlds != b.init.worlds || a.init.constraints.size() != b.init.constraints.size()) return false;
    for (std::size_t i = 0; i < a.init.constraints.size(); ++i)
        if (!(a.init.constraints[i] == b.init.constraints[i])) return false;
    if (a.kb0 != b.kb0 || !equal(a.program, b.program)) return false;
    if (a.properties.size() != b.properties.size()) return false;
    for (std::size_t i = 0; i < a.properties.size(); ++i)
        if (a.properties[i].name != b.properties[i].name || !equal(a.properties[i].formula, b.properties[i].formula))
            return false;
    return true;
}

void inject_reserved(ModelFile& m) {
    m.fluents.push_back({std::string(kFinalFluent), FluentDecl::Role::Reserved});
    m.fluents.push_back({std::string(kFailFluent), FluentDecl::Role::Reserved});
    ActionDecl eps;
    eps.name = std::string(kEpsAction);
    eps.kind = ActionDecl::Kind::Terminate;
    ActionDecl abort;
    abort.name = std::string(kAbortAction);
    abort.kind = ActionDecl::Kind::Abort;
    m.actions.push_back(std::move(eps));
    m.actions.push_back(std::move(abort));
    for (auto* bat : {&m.real_bat, &m.believed_bat}) {
        bat->ssa.resize(m.fluents.size());
        bat->likelihood.resize(m.actions.size());
    }
}

}  // namespace bp
