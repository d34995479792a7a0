#include "doctest.h"
#include "support.hpp"

using namespace bp;
using bp::test::coffee;
using bp::test::q;

namespace {

std::string first_code(std::string_view text) {
    try {
        parse_model(text);
    } catch (const ModelError& e) {
        return e.diagnostics().front().code;
    }
    return "";
}

const char* kTiny = R"(
fluents { h }
action a stochastic(x; y) {
  outcomes: (x);
  likelihood { when true: 1; }
}
ssa h { case a(x, y): h + y; }
belief { {h = 0}: 1 }
)";

}  // namespace

TEST_CASE("coffee model parses with the expected declarations") {
    const ModelFile& m = coffee();
    REQUIRE(m.state_fluent_count() == 1);
    CHECK(m.fluents[0].name == "h");
    CHECK(m.fluents[m.final_fluent()].name == "Final");
    CHECK(m.fluents[m.fail_fluent()].name == "Fail");

    auto east = m.find_action("east");
    auto sencfe = m.find_action("sencfe");
    REQUIRE(east);
    REQUIRE(sencfe);
    CHECK(m.actions[*east].kind == ActionDecl::Kind::Stochastic);
    CHECK(m.actions[*east].controllable_arity() == 1);
    CHECK(m.actions[*east].uncontrollable_arity() == 1);
    CHECK(m.actions[*sencfe].kind == ActionDecl::Kind::Sensing);
    CHECK(m.actions[*sencfe].controllable_arity() == 0);
    CHECK(m.actions[*sencfe].uncontrollable_arity() == 1);
    CHECK(m.actions[m.eps_action()].name == "eps");
    CHECK(m.actions[m.abort_action()].name == "fail");
    CHECK(m.properties.size() == 2);
    CHECK(m.init.worlds.size() == 3);
}

TEST_CASE("decimal literals are exact") {
    const ModelFile& m = coffee();
    auto sencfe = *m.find_action("sencfe");
    const auto& row = m.real_bat.likelihood[sencfe].rows[0];
    CHECK(row.weights[0]->value == q(1, 10));
    CHECK(row.weights[1]->value == q(9, 10));
    const auto& p1 = m.find_property("P1")->formula;
    REQUIRE(p1->kind == StateFormula::Kind::Prob);
    CHECK(p1->interval.lo == q(1, 20));
    CHECK(p1->interval.hi == 1);
    CHECK(p1->trace->kind == TraceFormula::Kind::BoundedUntil);
    CHECK(p1->trace->bound == 2);
}

TEST_CASE("believed theory overrides only the sensor table") {
    const ModelFile& m = coffee();
    auto east = *m.find_action("east");
    auto sencfe = *m.find_action("sencfe");
    CHECK(m.believed_bat.likelihood[sencfe].rows.size() == 2);
    CHECK(m.real_bat.likelihood[sencfe].rows.size() == 3);
    CHECK(m.believed_bat.likelihood[east].rows.size() == m.real_bat.likelihood[east].rows.size());
    CHECK(m.believed_bat.ssa[0].size() == 1);
}

TEST_CASE("empty program section parses to nil") {
    ModelFile m = parse_model("fluents { h }\nbelief { {h = 0}: 1 }\nprogram { }\n");
    CHECK(m.program->kind == Program::Kind::Nil);
}

TEST_CASE("reserved names are rejected") {
    CHECK(first_code("fluents { Final }") == "E-RESERVED");
    CHECK(first_code("fluents { h }\naction eps sensing(y) { outcomes: (1); }") == "E-RESERVED");
    CHECK(first_code(std::string(kTiny) + "program { eps; }") == "E-RESERVED");
}

TEST_CASE("diagnostics carry positions") {
    try {
        parse_model("fluents { h }\nprogram {\n  east(1);\n}\n");
        FAIL("expected an error");
    } catch (const ModelError& e) {
        REQUIRE(e.diagnostics().size() == 1);
        CHECK(e.diagnostics()[0].code == "E-UNDECLARED");
        CHECK(e.diagnostics()[0].line == 3);
        CHECK(e.diagnostics()[0].column == 3);
    }
}

TEST_CASE("error codes for malformed models") {
    CHECK(first_code("fluents { h, h }") == "E-DUPLICATE");
    CHECK(first_code("fluents { h(x) }") == "E-ARITY");
    CHECK(first_code(std::string(kTiny) + "program { a; }") == "E-ARITY");
    CHECK(first_code(std::string(kTiny) + "program { a(1, 2); }") == "E-ARITY");
    CHECK(first_code(std::string(kTiny) + "program { test h = 0; }") == "E-SORT");
    CHECK(first_code(std::string(kTiny) + "program { test forall x. B(h = x) = 1; }") == "E-QUANTIFIER");
    CHECK(first_code(std::string(kTiny) + "program { test B(B(h = 0) = 1) = 1; }") == "E-SORT");
    CHECK(first_code(std::string(kTiny) + "program { test B(g = 0) = 1; }") == "E-UNDECLARED");
    CHECK(first_code(std::string(kTiny) + "program { a(1) }") == "E-SYNTAX");
    CHECK(first_code("fluents { h }\naction s sensing(y) { outcomes: (1); }\nssa h { case s(y): y; }") ==
          "E-SENSING-SSA");
    CHECK(first_code("fluents { h, g }\nbelief { {h = 0}: 1 }") == "E-VALUATION");
    CHECK(first_code("action a sensing(y) { }") == "E-SYNTAX");
    CHECK(first_code("fluents { h } @") == "E-SYNTAX");
}

TEST_CASE("while is sugar for star, test and negated test") {
    ModelFile m = parse_model(std::string(kTiny) + "program { while B(h = 1) < 1 do a(1); end }");
    const ProgramPtr& p = m.program;
    REQUIRE(p->kind == Program::Kind::Seq);
    REQUIRE(p->first->kind == Program::Kind::Star);
    const ProgramPtr& body = p->first->first;
    REQUIRE(body->kind == Program::Kind::Seq);
    CHECK(body->first->kind == Program::Kind::Test);
    CHECK(body->second->kind == Program::Kind::Prim);
    REQUIRE(p->second->kind == Program::Kind::Test);
    CHECK(p->second->test.root->kind == Formula::Kind::Not);
    CHECK(equal(p->second->test.root->args[0], body->first->test.root));
}

TEST_CASE("if-then-else is sugar for a guarded choice") {
    ModelFile m = parse_model(std::string(kTiny) + "program { if B(h = 1) > 0 then a(1); else a(2); end }");
    REQUIRE(m.program->kind == Program::Kind::Choice);
    CHECK(m.program->first->first->kind == Program::Kind::Test);
    CHECK(m.program->second->first->test.root->kind == Formula::Kind::Not);
}

TEST_CASE("membership sugar expands to a disjunction") {
    FluentFormula f = parse_fluent_formula(coffee(), "h in {1, 3}");
    REQUIRE(f.root->kind == Formula::Kind::Or);
    CHECK(print(f) == "(h = 1 || h = 3)");
}

TEST_CASE("G is rewritten as F of the negation with a flipped interval") {
    StatePtr s = parse_state_formula(coffee(), "P>=0.9 [G<=3 B(h = 2) < 1]");
    REQUIRE(s->kind == StateFormula::Kind::Prob);
    CHECK(s->interval.lo == 0);
    CHECK(s->interval.hi == q(1, 10));
    CHECK(s->trace->kind == TraceFormula::Kind::BoundedUntil);
    CHECK(s->trace->bound == 3);
    CHECK(s->trace->rhs->kind == StateFormula::Kind::Subj);
    CHECK(s->trace->rhs->beta.root->kind == Formula::Kind::Not);
}

TEST_CASE("P-free boolean structure collapses into one subjective leaf") {
    StatePtr s = parse_state_formula(coffee(), "B(h = 0) > 0 && !(Exp(h) < 1)");
    CHECK(s->kind == StateFormula::Kind::Subj);
    StatePtr t = parse_state_formula(coffee(), "B(h = 0) > 0 && P<0.5 [X B(h = 1) = 1]");
    REQUIRE(t->kind == StateFormula::Kind::And);
    CHECK(t->args[0]->kind == StateFormula::Kind::Subj);
    CHECK(t->args[1]->kind == StateFormula::Kind::Prob);
    CHECK_FALSE(t->args[1]->interval.hi_closed);
}

TEST_CASE("interval forms") {
    auto iv = [](const char* text) { return parse_state_formula(coffee(), text)->interval; };
    Interval a = iv("P[1/4, 3/4) [X true]");
    CHECK(a.lo == q(1, 4));
    CHECK(a.hi == q(3, 4));
    CHECK(a.lo_closed);
    CHECK_FALSE(a.hi_closed);
    Interval b = iv("P=1/2 [X true]");
    CHECK(b.lo == q(1, 2));
    CHECK(b.hi == q(1, 2));
    Interval c = iv("P>0 [X true]");
    CHECK_FALSE(c.lo_closed);
    CHECK(c.contains(q(1, 100)));
    CHECK_FALSE(c.contains(0));
}

TEST_CASE("coffee model round-trips through the printer") {
    const ModelFile& m = coffee();
    std::string text = print_model(m);
    ModelFile again = parse_model(text);
    CHECK(again == m);
    CHECK(print_model(again) == text);
}

TEST_CASE("fragment printers are re-parseable") {
    const ModelFile& m = coffee();
    for (const char* text : {"B(h = 2) < 1 && Conf(h, 1/2) <= 1/2", "!(Exp(h) + 1 >= 2 * B(h > 0))",
                             "ConfOpen(h, 1) > 0 || false"}) {
        SubjectiveFormula f = parse_subjective_formula(m, text);
        SubjectiveFormula g = parse_subjective_formula(m, print(f));
        CHECK(f == g);
    }
    StatePtr s = parse_state_formula(m, "P(0,1/2] [B(h = 0) > 0 U<=3 B(h = 2) = 1] && !(P>=1 [X true])");
    CHECK(equal(s, parse_state_formula(m, print_state_formula(s))));
}

TEST_CASE("ground primitives and valuations") {
    const ModelFile& m = coffee();
    PrimitiveProgram p = parse_primitive(m, "east(1)");
    CHECK(print_primitive(m, p) == "east(1)");
    Valuation v = parse_valuation(m, "h = -2");
    CHECK(v[0] == -2);
    CHECK(v.size() == 3);
    CHECK(print_valuation(m, v) == "{h = -2}");
}

TEST_CASE("validation accepts the coffee model") {
    auto diags = validate_restrictions(coffee());
    for (const auto& d : diags) INFO(d.to_string());
    CHECK(diags.empty());
}

TEST_CASE("validation rejects a belief that does not sum to one") {
    ModelFile m = parse_model("fluents { h }\nbelief { {h = 0}: 1/2, {h = 1}: 1/3 }");
    auto diags = validate_restrictions(m);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].code == "V-BELIEF-SUM");
}

TEST_CASE("validation flags each restriction with its own code") {
    auto codes = [](std::string_view text) {
        std::vector<std::string> out;
        for (const auto& d : validate_restrictions(parse_model(text))) out.push_back(d.code);
        return out;
    };
    auto has = [](const std::vector<std::string>& v, const char* c) {
        return std::find(v.begin(), v.end(), c) != v.end();
    };
    CHECK(has(codes("fluents { h }\nbelief { {h = 0}: 0, {h = 1}: 1 }"), "V-BELIEF-WEIGHT"));
    CHECK(has(codes("fluents { h }\naction a stochastic(; y) { outcomes: ; }\nbelief { {h = 0}: 1 }"),
              "V-NO-OUTCOMES"));
    CHECK(has(codes("fluents { h }\naction a stochastic(; y) { outcomes: (0), (1);\n"
                    "likelihood { when true: 1/2, 1/3; } }\nbelief { {h = 0}: 1 }"),
              "V-ROW-SUM"));
    CHECK(has(codes("fluents { h }\naction a stochastic(; y) { outcomes: (0), (1);\n"
                    "likelihood { when true: 3/2, -1/2; } }\nbelief { {h = 0}: 1 }"),
              "V-WEIGHT-RANGE"));
    CHECK(has(codes("fluents { h }\naction a stochastic(; y) { outcomes: (0);\n"
                    "likelihood { when h >= 0: 1; when h <= 0: 1; } }\nbelief { {h = 0}: 1 }\nprogram { a; }"),
              "V-CONTEXT-OVERLAP"));
    CHECK(has(codes("fluents { h }\naction a stochastic(; y) { outcomes: (0);\n"
                    "likelihood { when h > 0: 1; } }\nbelief { {h = 0}: 1 }\nprogram { a; }"),
              "V-CONTEXT-GAP"));
    // Parameter-dependent row sums are checked where the program instantiates them.
    CHECK(has(codes("fluents { h }\naction a stochastic(x; y) { outcomes: (0), (1);\n"
                    "likelihood { when true: x, 1/2; } }\nbelief { {h = 0}: 1 }\nprogram { a(1/3); }"),
              "V-ROW-SUM"));
    CHECK(codes("fluents { h }\naction a stochastic(x; y) { outcomes: (0), (1);\n"
                "likelihood { when true: x, 1 - x; } }\nbelief { {h = 0}: 1 }\nprogram { a(1/3); }")
              .empty());
}

TEST_CASE("sensor likelihood rows at the coffee position sum to one") {
    const ModelFile& m = coffee();
    auto sencfe = *m.find_action("sencfe");
    Rational one = action_likelihood(m, GroundAction{sencfe, {}, {q(1)}}, test::hw(2), m.real_bat);
    Rational zero = action_likelihood(m, GroundAction{sencfe, {}, {q(0)}}, test::hw(2), m.real_bat);
    CHECK(one == q(4, 5));
    CHECK(zero == q(1, 5));
    CHECK(one + zero == 1);
}
