#include "bp/pomdp.hpp"

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

#include <set>

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

const Built& coffee_built() {
    static const Built b = build(coffee(), 2, {hw(0), hw(-1), hw(-2)}, coffee().properties.at(0).formula);
    return b;
}

std::size_t state_named(const Built& b, std::size_t t, const std::string& name) {
    for (std::size_t s = 0; s < b.ps[t].states.size(); ++s)
        if (state_name(b.m, b.a, b.ps[t], s) == name) return s;
    FAIL("no state " << name);
    return 0;
}

const char* kTiny =
    "fluents { h }\n"
    "action a stochastic(; y) { outcomes: (1), (0); likelihood { when true: 1/2, 1/2; } }\n"
    "action b stochastic(; y) { outcomes: (1); likelihood { when true: 1; } }\n"
    "ssa h { case a(y): h + y; case b(y): h - y; }\n"
    "init { constraints: h = 0; worlds: {h = 0}; }\n"
    "belief { {h = 0}: 1 }\n";

ModelFile tiny(const std::string& program) {
    return parse_model(std::string(kTiny) + "program { " + program + " }\n");
}

}  // namespace

TEST_CASE("coffee pomdp for h = 0 carries the 1/20 path") {
    const Built& b = coffee_built();
    const FinitePomdp& p = b.ps[0];
    CHECK(p.k == 2);
    CHECK(p.states.size() == 6);
    CHECK(p.breakdown_branches == 0);
    CHECK_FALSE(p.sink_obs);

    REQUIRE(p.options[p.initial].size() == 1);
    const PomdpOption& east = p.options[p.initial][0];
    CHECK(option_label(b.m, east) == "east(1)");
    REQUIRE(east.succ.size() == 2);
    for (const auto& t : east.succ) CHECK(t.prob == q(1, 2));

    std::size_t after = state_named(b, 0, "<east(1,1), n0>");
    REQUIRE(p.options[after].size() == 1);
    const PomdpOption& sense = p.options[after][0];
    CHECK(option_label(b.m, sense) == "sencfe");
    std::map<std::string, Rational> probs;
    for (const auto& t : sense.succ) probs[print_ground_action(b.m, *t.outcome)] = t.prob;
    CHECK(probs == std::map<std::string, Rational>{{"sencfe(0)", q(9, 10)}, {"sencfe(1)", q(1, 10)}});

    // Independent oracle: the real likelihood of the path at h = 0.
    std::vector<GroundAction> z{parse_ground_action(b.m, "east(1,1)"), parse_ground_action(b.m, "sencfe(1)")};
    CHECK(trace_likelihood(b.m, hw(0), z, b.m.real_bat) == q(1, 20));

    std::size_t goal = state_named(b, 0, "<east(1,1).sencfe(1), n1>");
    CHECK(p.states[goal].frontier);
    CHECK(render_distribution(b.m, p.observations[p.obs_of[goal]].dist) == "{[h=2]: 1}");
}

TEST_CASE("coffee pomdps for h = -1 and h = -2 coincide") {
    const Built& b = coffee_built();
    REQUIRE(b.ps.size() == 3);
    std::set<std::string> prints;
    for (const auto& p : b.ps) prints.insert(pomdp_fingerprint(b.m, b.a, p));
    CHECK(prints.size() == 2);
    CHECK(pomdp_fingerprint(b.m, b.a, b.ps[1]) == pomdp_fingerprint(b.m, b.a, b.ps[2]));
    CHECK(pomdp_fingerprint(b.m, b.a, b.ps[0]) != pomdp_fingerprint(b.m, b.a, b.ps[1]));
    // At h = -1 the sensor never fires, so the h = 2 observation is absent.
    for (std::size_t t : {1, 2})
        for (const auto& kb : b.ps[t].observations) CHECK_FALSE((kb.dist.size() == 1 && kb.dist.count(hw(2)) == 1));
}

TEST_CASE("options are distributions and observations are uniform") {
    const Built& b = coffee_built();
    for (const auto& p : b.ps) {
        CHECK(p.nonuniform_observations == 0);
        for (std::size_t s = 0; s < p.states.size(); ++s) {
            REQUIRE_FALSE(p.options[s].empty());
            for (const auto& o : p.options[s]) {
                Rational total = 0;
                for (const auto& t : o.succ) total += t.prob;
                CHECK(total == 1);
            }
        }
        std::map<std::size_t, std::string> sig;
        for (std::size_t s = 0; s < p.states.size(); ++s) {
            if (p.states[s].frontier) continue;
            auto [it, fresh] = sig.emplace(p.obs_of[s], option_signature(b.m, p, s));
            if (!fresh) CHECK(it->second == option_signature(b.m, p, s));
        }
    }
}

TEST_CASE("horizon zero gives a single state") {
    Built b = build(coffee(), 0, {hw(0)});
    REQUIRE(b.ps.size() == 1);
    const FinitePomdp& p = b.ps[0];
    CHECK(p.states.size() == 1);
    CHECK(p.states[0].frontier);
    CHECK(p.observations[0] == initial_kb(b.m));
    REQUIRE(p.options[0].size() == 1);
    CHECK(p.options[0][0].kind == PomdpOption::Kind::Fail);
    for (std::size_t i = 0; i < p.ap.size(); ++i)
        CHECK((p.labels[0][i] != 0) ==
              eval_subjective(b.a.context.entries[p.ap_entry[i]].formula, initial_kb(b.m)));
}

TEST_CASE("final configurations terminate through eps") {
    Built b = build(tiny("b;"), 3, {hw(0)});
    const FinitePomdp& p = b.ps[0];
    std::size_t done = state_named(b, 0, "<b(1), n1>");
    REQUIRE(p.options[done].size() == 1);
    CHECK(p.options[done][0].kind == PomdpOption::Kind::Eps);
    std::size_t after = p.options[done][0].succ[0].target;
    CHECK(state_name(b.m, b.a, p, after) == "<b(1).eps, n1>");
    CHECK(b.a.table.seqs[p.states[after].seq].size() == 2);
}

TEST_CASE("choice and star offer several options") {
    Built c = build(tiny("choose { a; } or { b; }"), 1, {hw(0)});
    CHECK(c.ps[0].options[c.ps[0].initial].size() == 2);

    Built s = build(tiny("star { b; }"), 1, {hw(0)});
    const auto& opts = s.ps[0].options[s.ps[0].initial];
    REQUIRE(opts.size() == 2);
    CHECK(option_label(s.m, opts[0]) == "b");
    CHECK(option_label(s.m, opts[1]) == "eps");
}

TEST_CASE("failing tests abort through fail") {
    Built b = build(tiny("test B(h = 1) = 1; b;"), 1, {hw(0)});
    const auto& opts = b.ps[0].options[b.ps[0].initial];
    REQUIRE(opts.size() == 1);
    CHECK(opts[0].kind == PomdpOption::Kind::Fail);
    CHECK(state_name(b.m, b.a, b.ps[0], opts[0].succ[0].target) == "<fail, n0>");
}

TEST_CASE("belief breakdown routes to the sink") {
    ModelFile m = parse_model(
        "fluents { h }\n"
        "action s sensing(y) { outcomes: (1), (0); likelihood { when true: 1/2, 1/2; } }\n"
        "believed { likelihood s { when true: 1, 0; } }\n"
        "init { constraints: h = 0; worlds: {h = 0}; }\n"
        "belief { {h = 0}: 1 }\n"
        "program { s; }\n");
    Built b = build(std::move(m), 2, {hw(0)});
    const FinitePomdp& p = b.ps[0];
    CHECK(p.breakdown_branches == 1);
    REQUIRE(p.sink_obs);
    std::size_t sink = 0;
    while (!p.states[sink].sink) ++sink;
    CHECK(state_name(b.m, b.a, p, sink) == "breakdown");
    CHECK(p.obs_of[sink] == *p.sink_obs);
    for (char l : p.labels[*p.sink_obs]) CHECK(l == 0);
    REQUIRE(p.options[sink].size() == 1);
    CHECK(p.options[sink][0].succ[0].target == sink);
    const auto& opt = p.options[p.initial][0];
    REQUIRE(opt.succ.size() == 2);
    CHECK(opt.succ[1].target == sink);
    CHECK(opt.succ[1].prob == q(1, 2));
}

TEST_CASE("json and dot exports") {
    const Built& b = coffee_built();
    auto js = nlohmann::json::parse(pomdp_to_json(b.m, b.a, b.ps[0], 0));
    CHECK(js["states"].size() == b.ps[0].states.size());
    CHECK(js.contains("observations"));
    std::string dot = pomdp_to_dot(b.m, b.a, b.ps[0]);
    CHECK(dot.find("digraph") == 0);
    CHECK(dot.find("1/10") != std::string::npos);
}
