#include "bp/checker.hpp"

#include "doctest.h"
#include "support.hpp"

#include <cstdlib>
#include <functional>

using namespace bp;
using bp::test::coffee;
using bp::test::hw;
using bp::test::q;

namespace {

struct Built {
    ModelFile m;
    CharGraph g;
    TypeAnalysis a;
    std::vector<FinitePomdp> ps;
};

Built build(ModelFile m, std::size_t k, const std::vector<World>& reps, const StatePtr& phi = nullptr) {
    Built b{std::move(m), {}, {}, {}};
    b.g = build_graph(b.m.program);
    b.a = compute_types(b.m, k, reps, phi);
    for (std::size_t t = 0; t < b.a.types.size(); ++t) b.ps.push_back(build_pomdp(b.m, b.g, b.a, t));
    return b;
}

ModelFile tiny(const std::string& program) {
    return parse_model(
        "fluents { h }\n"
        "action a stochastic(; y) { outcomes: (1), (0); likelihood { when true: 1/2, 1/2; } }\n"
        "action b stochastic(; y) { outcomes: (1); likelihood { when true: 1; } }\n"
        "ssa h { case a(y): h + y; case b(y): h - y; }\n"
        "init { constraints: h = 0; worlds: {h = 0}; }\n"
        "belief { {h = 0}: 1 }\n"
        "program { " + program + " }\n");
}

std::string diag_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ModelError& e) {
        return e.diagnostics().empty() ? "" : e.diagnostics()[0].code;
    }
    return "none";
}

// Direct interpreter over configurations (real world, believed KB, node).
// Only valid for programs where at most one transition is ever offered.
Rational oracle(const ModelFile& m, const CharGraph& g, const World& w, const KnowledgeBase& kb, std::size_t node,
                const SubjectiveFormula& lhs, const SubjectiveFormula& rhs, std::size_t steps) {
    bool l = eval_subjective(lhs, kb);
    if (l && eval_subjective(rhs, kb)) return 1;
    if (!l || steps == 0) return 0;
    EnabledSet en = enabled(g, node, kb);
    std::size_t offered = en.edges.size() + en.is_final + en.is_failing;
    REQUIRE(offered == 1);
    std::vector<std::pair<GroundAction, std::size_t>> moves;
    if (!en.edges.empty()) {
        const GraphEdge& e = g.edges[en.edges[0]];
        for (const auto& t : oi_alternatives(m, e.rho)) moves.push_back({t, e.target});
    } else if (en.is_final) {
        moves.push_back({eps_action(m), g.nil_node});
    } else {
        moves.push_back({abort_action(m), node});
    }
    Rational total = 0;
    for (const auto& [t, target] : moves) {
        Rational p = action_likelihood(m, t, w, m.real_bat);
        if (p == 0) continue;
        auto next = try_progress_kb(m, kb, t);
        if (!next) continue;  // breakdown satisfies nothing
        total += p * oracle(m, g, progress_world(m, w, t, m.real_bat), *next, target, lhs, rhs, steps - 1);
    }
    return total;
}

SubjectiveFormula subj(const ModelFile& m, const char* text) {
    return parse_subjective_formula(m, text);
}

}  // namespace

TEST_CASE("coffee property P1 is violated") {
    const ModelFile& m = coffee();
    StatePtr phi = m.properties.at(0).formula;
    Built b = build(m, 2, {hw(0), hw(-1), hw(-2)}, phi);
    Verdict v = check(b.m, b.a, b.ps, phi);
    CHECK_FALSE(v.holds);
    REQUIRE(v.per_type.size() == 3);
    for (const auto& tv : v.per_type) {
        REQUIRE(tv.probs.size() == 1);
        CHECK(tv.probs[0].policy_count == 1);
        CHECK(tv.space.count == 1);
        Rational expected = tv.witness == hw(0) ? q(1, 20) : q(0);
        CHECK(tv.probs[0].max == expected);
        CHECK(tv.probs[0].min == expected);
        CHECK(tv.holds == (tv.witness == hw(0)));
    }
}

TEST_CASE("strict lower bound fails at exactly 1/20") {
    const ModelFile& m = coffee();
    StatePtr phi = parse_state_formula(m, "P>1/20 [F<=2 B(h = 2) = 1]");
    Built b = build(m, 2, {hw(0)}, phi);
    Verdict v = check(b.m, b.a, b.ps, phi);
    CHECK_FALSE(v.holds);
    CHECK(v.per_type.at(0).probs.at(0).max == q(1, 20));
}

TEST_CASE("checker agrees with a direct interpreter on coffee") {
    const ModelFile& m = coffee();
    CharGraph g = build_graph(m.program);
    const char* props[] = {
        "P>=0 [F<=1 B(h = 2) = 1]",
        "P>=0 [F<=2 B(h = 2) = 1]",
        "P>=0 [F<=3 B(h = 2) = 1]",
        "P>=0 [F<=3 B(h = 1) >= 1/2]",
        "P>=0 [B(h = 2) < 1 U<=3 B(h = 2) = 1]",
        "P>=0 [Conf(h, 1/2) <= 1/2 U<=3 B(h = 0) = 1/3]",
    };
    for (const char* text : props) {
        StatePtr phi = parse_state_formula(m, text);
        const TraceFormula& psi = *phi->trace;
        Built b = build(m, horizon_of(phi), {hw(0), hw(-1), hw(-2), hw(-3)}, phi);
        Verdict v = check(b.m, b.a, b.ps, phi);
        for (const auto& tv : v.per_type) {
            for (const auto& w : b.a.types[tv.type].members) {
                Rational expect = oracle(m, g, w, initial_kb(m), 0, psi.lhs->beta, psi.rhs->beta, psi.bound);
                CHECK_MESSAGE(tv.probs[0].max == expect, text << " at " << render_world(m, w));
                CHECK(tv.probs[0].min == expect);
            }
        }
    }
}

TEST_CASE("until needs its left operand at the success position") {
    const ModelFile& m = coffee();
    StatePtr phi = parse_state_formula(m, "P>=0 [B(h = 2) < 1 U<=2 B(h = 2) = 1]");
    Built b = build(m, 2, {hw(0)}, phi);
    Verdict v = check(b.m, b.a, b.ps, phi);
    // B(h = 2) < 1 fails exactly where B(h = 2) = 1 holds.
    CHECK(v.per_type.at(0).probs.at(0).max == 0);
}

TEST_CASE("next and trivial properties") {
    const ModelFile& m = coffee();
    StatePtr phi = parse_state_formula(m, "P>=0 [X B(true) = 1]");
    Built b = build(m, 1, {hw(0)}, phi);
    Verdict v = check(b.m, b.a, b.ps, phi);
    CHECK(v.holds);
    CHECK(v.per_type[0].probs[0].min == 1);

    StatePtr x = parse_state_formula(m, "P=1/2 [X Conf(h, 1/2) <= 1/2]");
    Built bx = build(m, 1, {hw(0)}, x);
    Verdict vx = check(bx.m, bx.a, bx.ps, x);
    CHECK(vx.per_type[0].probs[0].max == 1);
    CHECK_FALSE(vx.holds);

    StatePtr s = parse_state_formula(m, "B(h = 2) < 1");
    Built bs = build(m, 0, {hw(0)}, s);
    CHECK(check(bs.m, bs.a, bs.ps, s).holds);
    StatePtr n = parse_state_formula(m, "!(B(h = 2) < 1) || P>=0 [X B(true) = 1]");
    Built bn = build(m, 1, {hw(0)}, n);
    CHECK(check(bn.m, bn.a, bn.ps, n).holds);
}

TEST_CASE("choice yields two policies with distinct extremes") {
    ModelFile m = tiny("choose { a; } or { b; }");
    StatePtr phi = parse_state_formula(m, "P>=1/2 [F<=1 B(h = 1) > 0]");
    Built b = build(std::move(m), 1, {hw(0)}, phi);
    Verdict v = check(b.m, b.a, b.ps, phi);
    const TypeVerdict& tv = v.per_type.at(0);
    CHECK(tv.space.count == 2);
    CHECK(tv.probs[0].min == 0);
    CHECK(tv.probs[0].max == 1);
    CHECK_FALSE(v.holds);
    auto best = describe_policy(b.m, b.ps[0], tv.space, tv.probs[0].argmax);
    REQUIRE(best.size() == 1);
    CHECK(best[0].find("-> a") != std::string::npos);
    auto worst = describe_policy(b.m, b.ps[0], tv.space, tv.probs[0].argmin);
    CHECK(worst[0].find("-> b") != std::string::npos);
    CHECK(enumerate_policies(tv.space, 10).size() == 2);
    CHECK(diag_code([&] { enumerate_policies(tv.space, 1); }) == "C-POLICY-CAP");
    CheckOptions capped;
    capped.policy_cap = 1;
    CHECK(diag_code([&] { check(b.m, b.a, b.ps, phi, capped); }) == "C-POLICY-CAP");
}

TEST_CASE("star offers eps or another iteration") {
    ModelFile m = tiny("star { b; }");
    StatePtr phi = parse_state_formula(m, "P>=0 [F<=1 B(h = -1) = 1]");
    Built b = build(std::move(m), 1, {hw(0)}, phi);
    Verdict v = check(b.m, b.a, b.ps, phi);
    CHECK(v.per_type.at(0).space.count == 2);
    CHECK(v.per_type[0].probs[0].min == 0);
    CHECK(v.per_type[0].probs[0].max == 1);
}

TEST_CASE("same observation shares a choice") {
    // Both branches of the first choice leave the belief unchanged, so the
    // second choice is made once for both configurations.
    ModelFile m = tiny("choose { test true; } or { test B(true) = 1; } choose { a; } or { b; }");
    StatePtr phi = parse_state_formula(m, "P>=0 [F<=1 B(h = 1) > 0]");
    Built b = build(std::move(m), 1, {hw(0)}, phi);
    Verdict v = check(b.m, b.a, b.ps, phi);
    CHECK(v.per_type.at(0).space.count == 2);
}

TEST_CASE("horizon mismatch and inadmissible properties") {
    const ModelFile& m = coffee();
    StatePtr phi = m.properties.at(0).formula;
    Built b = build(m, 1, {hw(0)}, phi);
    CHECK(diag_code([&] { check(b.m, b.a, b.ps, phi); }) == "C-HORIZON");
    CHECK(diag_code([&] { check(b.m, b.a, b.ps, m.properties.at(1).formula); }) == "C-UNBOUNDED");
}

TEST_CASE("forward mass is conserved") {
    const ModelFile& m = coffee();
    StatePtr phi = parse_state_formula(m, "P>=0 [F<=3 B(h = 2) = 1]");
    Built b = build(m, 3, {hw(0), hw(-1)}, phi);
    for (const auto& p : b.ps) {
        PolicySpace space = policy_space(b.m, p);
        auto masses = forward_masses(p, space, policy_at(space, 0), *phi->trace);
        CHECK(masses.size() == 4);
        for (const auto& x : masses) CHECK(x == 1);
    }
}

TEST_CASE("policy cap from the environment") {
    ::setenv("BP_POLICY_CAP", "42", 1);
    CHECK(default_policy_cap() == 42);
    ::setenv("BP_POLICY_CAP", "junk", 1);
    CHECK(default_policy_cap() == 1000000);
    ::unsetenv("BP_POLICY_CAP");
    CHECK(default_policy_cap() == 1000000);
}

TEST_CASE("threaded evaluation matches serial") {
    ModelFile m = tiny("choose { a; } or { b; } choose { a; } or { b; } choose { a; } or { b; }");
    StatePtr phi = parse_state_formula(m, "P>=0 [F<=3 B(h = 2) > 0]");
    Built b = build(std::move(m), 3, {hw(0)}, phi);
    CheckOptions one, four;
    four.threads = 4;
    Verdict v1 = check(b.m, b.a, b.ps, phi, one);
    Verdict v4 = check(b.m, b.a, b.ps, phi, four);
    CHECK(v1.per_type[0].probs[0].min == v4.per_type[0].probs[0].min);
    CHECK(v1.per_type[0].probs[0].max == v4.per_type[0].probs[0].max);
    CHECK(v1.per_type[0].probs[0].argmax.choice == v4.per_type[0].probs[0].argmax.choice);
    CHECK(v1.per_type[0].probs[0].argmin.choice == v4.per_type[0].probs[0].argmin.choice);
    CHECK(v1.per_type[0].probs[0].max == 1);
}
