#include "bp/pa.hpp"

#include "doctest.h"
#include "support.hpp"

#include <functional>

using namespace bp;
using bp::test::q;

namespace {

ProbAutomaton two_state() {
    ProbAutomaton pa;
    pa.states = 2;
    pa.alphabet = {"a"};
    pa.matrices = {{{q(1, 2), q(1, 2)}, {q(0), q(1)}}};
    pa.initial = 0;
    pa.accepting = {1};
    pa.threshold = q(3, 4);
    return pa;
}

std::string diag_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ModelError& e) {
        return e.diagnostics().empty() ? "" : e.diagnostics()[0].code;
    }
    return "none";
}

// Independent oracle: enumerate state paths and sum their products.
Rational path_sum(const ProbAutomaton& pa, const std::vector<std::size_t>& word) {
    Rational total = 0;
    std::function<void(std::size_t, std::size_t, Rational)> walk = [&](std::size_t i, std::size_t s, Rational p) {
        if (p == 0) return;
        if (i == word.size()) {
            for (auto f : pa.accepting)
                if (f == s) total += p;
            return;
        }
        for (std::size_t t = 0; t < pa.states; ++t) walk(i + 1, t, p * pa.matrices[word[i]][s][t]);
    };
    walk(0, pa.initial, Rational(1));
    return total;
}

}  // namespace

TEST_CASE("oracle on the two-state automaton") {
    ProbAutomaton pa = two_state();
    CHECK(oracle_accept_prob(pa, {}) == 0);
    CHECK(oracle_accept_prob(pa, {0}) == q(1, 2));
    CHECK(oracle_accept_prob(pa, {0, 0, 0}) == q(7, 8));
    pa.initial = 1;
    CHECK(oracle_accept_prob(pa, {}) == 1);
}

TEST_CASE("encoded model tracks the automaton") {
    ProbAutomaton pa = two_state();
    ModelFile m = encode(pa);
    CHECK(validate_restrictions(m).empty());
    CHECK(encoded_accept_belief(m, pa, {0}) == q(1, 2));
    KnowledgeBase kb = progress_kb(m, initial_kb(m), oi_alternatives(m, PrimitiveProgram{*m.find_action("rho1"), {}})[0]);
    CHECK(eval_subjective(parse_subjective_formula(m, "B(hs = 2) = 1/2"), kb));
    SoundnessReport r = soundness_check(pa, 6);
    CHECK(r.ok);
    CHECK(r.words_checked == 7);
    CHECK(soundness_check(pa, 0).words_checked == 0);
    CHECK(soundness_check(pa, 0).ok);
    // Round trip through the printer.
    CHECK(print_model(parse_model(print_model(m))) == print_model(m));
}

TEST_CASE("identity letters leave the belief alone") {
    ProbAutomaton pa;
    pa.states = 3;
    pa.alphabet = {"x", "y"};
    std::vector<std::vector<Rational>> id{{q(1), q(0), q(0)}, {q(0), q(1), q(0)}, {q(0), q(0), q(1)}};
    pa.matrices = {id, id};
    pa.accepting = {0, 2};
    pa.threshold = q(1, 2);
    ModelFile m = encode(pa);
    for (const auto& w : std::vector<std::vector<std::size_t>>{{}, {0}, {1, 0, 1}, {1, 1, 1, 1}})
        CHECK(encoded_accept_belief(m, pa, w) == 1);
    CHECK(is_sspa(pa));
}

TEST_CASE("random automata agree with the oracle") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        ProbAutomaton pa = random_pa(seed);
        CHECK(pa.states <= 4);
        CHECK(pa.alphabet.size() <= 2);
        validate_pa(pa);
        CHECK(validate_restrictions(encode(pa)).empty());
        SoundnessReport r = soundness_check(pa, 5, PaEncoding::Matrix, 2);
        CHECK_MESSAGE(r.ok, "seed " << seed);
        for (const auto& w : std::vector<std::vector<std::size_t>>{{}, {0}, {0, 0}, {0, 0, 0}})
            CHECK(oracle_accept_prob(pa, w) == path_sum(pa, w));
    }
}

TEST_CASE("corrupted automata are rejected before checking") {
    ProbAutomaton pa = two_state();
    pa.matrices[0][0] = {q(1, 2), q(2, 5)};
    CHECK(diag_code([&] { encode(pa); }) == "PA-ROW-SUM");
    CHECK(diag_code([&] { soundness_check(pa, 3); }) == "PA-ROW-SUM");
    ProbAutomaton bad = two_state();
    bad.accepting = {5};
    CHECK(diag_code([&] { validate_pa(bad); }) == "PA-SHAPE");
    CHECK(diag_code([&] { pa_from_json("{\"states\": 2}"); }) == "PA-SHAPE");
}

TEST_CASE("json round trip") {
    ProbAutomaton pa = random_pa(77);
    ProbAutomaton back = pa_from_json(pa_to_json(pa));
    CHECK(back.states == pa.states);
    CHECK(back.alphabet == pa.alphabet);
    CHECK(back.matrices == pa.matrices);
    CHECK(back.accepting == pa.accepting);
    CHECK(back.threshold == pa.threshold);
    ProbAutomaton lit = pa_from_json(
        R"({"states": 2, "alphabet": ["a"], "matrices": [[["1/2", "1/2"], ["0", "1"]]], "accepting": [1], "threshold": "3/4"})");
    CHECK(oracle_accept_prob(lit, {0, 0, 0}) == q(7, 8));
}

TEST_CASE("local-effect encoding of a single probabilistic transition") {
    // q1 --l, 1/2--> q2 and q1 --l, 1/2--> q3; letter m moves q2 to q1.
    ProbAutomaton pa;
    pa.states = 3;
    pa.alphabet = {"l", "m"};
    pa.matrices = {
        {{q(0), q(1, 2), q(1, 2)}, {q(0), q(1), q(0)}, {q(0), q(0), q(1)}},
        {{q(1), q(0), q(0)}, {q(1), q(0), q(0)}, {q(0), q(0), q(1)}},
    };
    pa.accepting = {2};
    pa.threshold = q(3, 4);
    REQUIRE(is_sspa(pa));
    ModelFile local = encode(pa, PaEncoding::LocalEffect);
    ModelFile matrix = encode(pa, PaEncoding::Matrix);
    CHECK(validate_restrictions(local).empty());
    CHECK(encode_text(pa, PaEncoding::LocalEffect).find("when true: 1/2, 1/2;") != std::string::npos);
    for (const auto& w : std::vector<std::vector<std::size_t>>{{0}, {0, 1}, {0, 1, 0}, {0, 1, 0, 1, 0}}) {
        CHECK(encoded_accept_belief(local, pa, w) == encoded_accept_belief(matrix, pa, w));
        CHECK(encoded_accept_belief(local, pa, w) == oracle_accept_prob(pa, w));
    }
    CHECK(soundness_check(pa, 6, PaEncoding::LocalEffect).ok);
    CHECK(diag_code([&] { encode(two_state(), PaEncoding::LocalEffect); }) == "none");
    ProbAutomaton dense = random_pa(3, 4, 2);
    if (!is_sspa(dense)) CHECK(diag_code([&] { encode(dense, PaEncoding::LocalEffect); }) == "PA-NOT-SSPA");
}
