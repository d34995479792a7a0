// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include "bp/checker.hpp"
#include "bp/dsl.hpp"
#include "bp/pa.hpp"
#include "bp/simulator.hpp"
#include "property_checks.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <set>
#include <sstream>

using namespace bp;

namespace {

// Tolerances and sizes, fixed here rather than taken from the command line.
constexpr double kProgressionSeconds = 1.0;
constexpr double kTypesSeconds = 5.0;
constexpr double kPaSeconds = 30.0;
constexpr std::size_t kPaCount = 5;
constexpr std::size_t kPaMaxStates = 4;
constexpr std::size_t kPaMaxLetters = 2;
constexpr std::size_t kPaWordLength = 6;
constexpr std::size_t kSimTrials = 100000;
constexpr double kSimTolerance = 0.01;
constexpr std::uint64_t kSimSeed = 42;
constexpr std::size_t kPropertyCases = 200;

struct Line {
    bool pass = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

class Clock {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Rational q(long n, long d = 1) {
    Rational r(n, d);
    r.canonicalize();
    return r;
}

World hw(const ModelFile& m, long h) { return parse_valuation(m, "h = " + std::to_string(h)); }

BeliefDistribution h_dist(const ModelFile& m, std::initializer_list<std::pair<long, Rational>> entries) {
    BeliefDistribution d;
    for (const auto& [h, p] : entries) d[hw(m, h)] = p;
    return d;
}

const char* verdict(bool pass) { return pass ? "PASS" : "FAIL"; }

Line progression_goldens(const ModelFile& m) {
    Line l;
    Clock clock;
    KnowledgeBase f1 = progress_kb(m, initial_kb(m), parse_ground_action(m, "east(1,1)"));
    KnowledgeBase f2 = progress_kb(m, f1, parse_ground_action(m, "sencfe(1)"));
    double secs = clock.seconds();
    l.require(f1.dist == h_dist(m, {{0, q(1, 4)}, {1, q(1, 2)}, {2, q(1, 4)}}), "f' after east(1,1)");
    l.require(f2.dist == h_dist(m, {{2, q(1)}}), "f'' after sencfe(1)");
    l.require(secs < kProgressionSeconds, "runtime");
    l.detail << " f'=" << render_distribution(m, f1.dist) << " f''=" << render_distribution(m, f2.dist) << " in "
             << secs << "s";
    return l;
}

Line sensing_zero(const ModelFile& m) {
    Line l;
    KnowledgeBase f1 = progress_kb(m, initial_kb(m), parse_ground_action(m, "east(1,1)"));
    KnowledgeBase f3 = progress_kb(m, f1, parse_ground_action(m, "sencfe(0)"));
    l.require(f3.dist == h_dist(m, {{0, q(1, 3)}, {1, q(2, 3)}}), "f''' after sencfe(0)");
    l.detail << " f'''=" << render_distribution(m, f3.dist);
    return l;
}

struct CoffeeAnalysis {
    TypeAnalysis types;
    std::vector<FinitePomdp> pomdps;
    double seconds = 0;
};

CoffeeAnalysis analyse_coffee(const ModelFile& m, const StatePtr& phi) {
    Clock clock;
    CoffeeAnalysis a;
    CharGraph g = build_graph(m.program);
    a.types = compute_types(m, horizon_of(phi), {hw(m, 0), hw(m, -1), hw(m, -2)}, phi);
    for (std::size_t t = 0; t < a.types.types.size(); ++t) a.pomdps.push_back(build_pomdp(m, g, a.types, t));
    a.seconds = clock.seconds();
    return a;
}

Line type_abstraction(const ModelFile& m, const CoffeeAnalysis& a) {
    Line l;
    std::set<std::string> prints;
    std::map<std::string, std::string> by_witness;
    for (std::size_t t = 0; t < a.pomdps.size(); ++t) {
        std::string fp = pomdp_fingerprint(m, a.types, a.pomdps[t]);
        prints.insert(fp);
        by_witness[render_world(m, a.types.types[t].witness)] = fp;
    }
    l.require(a.types.types.size() == 3, "3 types");
    l.require(prints.size() == 2, "2 distinct POMDPs");
    l.require(by_witness.size() == 3 && by_witness["[h=-1]"] == by_witness["[h=-2]"] &&
                  by_witness["[h=0]"] != by_witness["[h=-1]"],
              "the h=-1 and h=-2 types share a POMDP");
    l.require(a.seconds < kTypesSeconds, "runtime");
    l.detail << " types=" << a.types.types.size() << " distinct POMDPs=" << prints.size() << " in " << a.seconds
             << "s";
    return l;
}

Line verification_verdict(const ModelFile& m, const CoffeeAnalysis& a, const StatePtr& phi) {
    Line l;
    Verdict v = check(m, a.types, a.pomdps, phi);
    l.require(!v.holds, "violated");
    std::map<std::string, Rational> maxima;
    for (const auto& tv : v.per_type) maxima[render_world(m, tv.witness)] = tv.probs.at(0).max;
    l.require(maxima.size() == 3, "three witnesses");
    l.require(maxima["[h=0]"] == q(1, 20), "max 1/20 for h=0");
    l.require(maxima["[h=-1]"] == 0 && maxima["[h=-2]"] == 0, "max 0 for h=-1 and h=-2");
    l.detail << " verdict=" << (v.holds ? "holds" : "violated");
    for (const auto& [w, p] : maxima) l.detail << " max" << w << "=" << to_string(p);
    return l;
}

Line pa_soundness() {
    Line l;
    Clock clock;
    std::size_t words = 0;
    for (std::uint64_t seed = 1; seed <= kPaCount; ++seed) {
        ProbAutomaton pa = random_pa(seed, kPaMaxStates, kPaMaxLetters);
        SoundnessReport r = soundness_check(pa, kPaWordLength);
        words += r.words_checked;
        std::size_t expected = 0, layer = 1;
        for (std::size_t len = 0; len <= kPaWordLength; ++len, layer *= pa.alphabet.size()) expected += layer;
        l.require(r.ok, "PA seed " + std::to_string(seed) + " diverges");
        l.require(r.words_checked == expected, "PA seed " + std::to_string(seed) + " word count");
    }
    double secs = clock.seconds();
    l.require(secs < kPaSeconds, "runtime");
    l.detail << " " << kPaCount << " PAs, " << words << " words up to length " << kPaWordLength << ", exact, in "
             << secs << "s";
    return l;
}

Line checker_simulator(const ModelFile& m) {
    Line l;
    TracePtr psi = parse_trace_formula(m, "F<=2 B(h = 2) = 1");
    EstimateOptions o;
    o.trials = kSimTrials;
    o.seed = kSimSeed;
    const double exact = 1.0 / 20.0;
    Estimate e0 = estimate(m, psi, hw(m, 0), Strategy{}, o);
    l.require(std::abs(e0.estimate - exact) <= kSimTolerance, "estimate within tolerance");
    l.require(e0.lower() <= exact && exact <= e0.upper(), "interval covers 1/20");
    l.detail << " h=0: " << e0.estimate << " [" << e0.lower() << ", " << e0.upper() << "]";
    for (long h : {-1L, -2L}) {
        Estimate e = estimate(m, psi, hw(m, h), Strategy{}, o);
        l.require(e.successes == 0, "estimate 0 for h=" + std::to_string(h));
        l.detail << " h=" << h << ": " << e.estimate;
    }
    return l;
}

Line property_suites() {
    Line l;
    auto checks = test::all_property_checks();
    checks.push_back([](std::size_t n) { return test::check_mdp_equivalence(n); });
    for (const auto& run : checks) {
        test::PropertyOutcome r = run(kPropertyCases);
        l.require(r.ok(kPropertyCases), r.name + (r.first_failure.empty() ? "" : ": " + r.first_failure));
        l.detail << " " << r.name << "=" << r.cases;
    }
    return l;
}

Line inadmissibility(const ModelFile& m, const CoffeeAnalysis& a) {
    Line l;
    const StatePtr& p2 = m.properties.at(1).formula;
    std::string code;
    try {
        check(m, a.types, a.pomdps, p2);
    } catch (const ModelError& e) {
        code = e.diagnostics().empty() ? "" : e.diagnostics()[0].code;
    }
    l.require(code == "C-UNBOUNDED", "checker rejects P2 with C-UNBOUNDED");
    EstimateOptions o;
    o.trials = 2000;
    o.horizon = 12;
    try {
        Estimate e = estimate(m, p2->trace, hw(m, 0), Strategy{}, o);
        l.require(e.lower_bound_only, "simulate flags a lower bound");
        l.detail << " checker=" << code << " simulate=" << e.estimate << " (lower bound, horizon " << o.horizon << ")";
    } catch (const std::exception& ex) {
        l.require(false, std::string("simulate threw: ") + ex.what());
    }
    return l;
}

}  // namespace

int main(int argc, char** argv) {
    std::string path = argc > 1 ? argv[1] : std::string(BP_MODELS_DIR) + "/coffee.bp";
    ModelFile m = load_model(path);
    StatePtr p1 = m.properties.at(0).formula;
    CoffeeAnalysis a = analyse_coffee(m, p1);

    struct Criterion {
        const char* name;
        std::function<Line()> run;
    };
    std::vector<Criterion> criteria = {
        {"progression goldens", [&] { return progression_goldens(m); }},
        {"sensing-0 golden", [&] { return sensing_zero(m); }},
        {"type abstraction", [&] { return type_abstraction(m, a); }},
        {"verification verdict", [&] { return verification_verdict(m, a, p1); }},
        {"PA-reduction soundness", [&] { return pa_soundness(); }},
        {"checker-simulator agreement", [&] { return checker_simulator(m); }},
        {"property-based suites", [&] { return property_suites(); }},
        {"inadmissibility", [&] { return inadmissibility(m, a); }},
    };
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Line l;
        try {
            l = criteria[i].run();
        } catch (const std::exception& e) {
            l.require(false, std::string("exception: ") + e.what());
        }
        all = all && l.pass;
        std::cout << verdict(l.pass) << " " << i + 1 << " " << criteria[i].name << ":" << l.detail.str() << "\n";
    }
    return all ? 0 : 1;
}
