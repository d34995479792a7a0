#pragma once

#include "bp/ast.hpp"
#include "bp/kb.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bp {

/// Probabilistic finite automaton. States are 0-based here; the encoded
/// fluent hs numbers them from 1.
struct ProbAutomaton {
    std::size_t states = 0;
    std::vector<std::string> alphabet;
    std::vector<std::vector<std::vector<Rational>>> matrices;  // [letter][from][to]
    std::size_t initial = 0;
    std::vector<std::size_t> accepting;
    Rational threshold = 0;
};

/// Throws ModelError: PA-SHAPE for inconsistent sizes or indices,
/// PA-ROW-SUM for a row that is not a probability vector.
void validate_pa(const ProbAutomaton& pa);

/// {"states": n, "alphabet": [...], "matrices": [[["1/2", ...], ...], ...],
///  "initial": i, "accepting": [...], "threshold": "p/q"}
ProbAutomaton pa_from_json(const std::string& text);
std::string pa_to_json(const ProbAutomaton& pa);

enum class PaEncoding {
    Matrix,       // state-dependent likelihood, context-free SSA
    LocalEffect,  // context-free likelihood, local-effect SSA (SSPA shape only)
};

/// True when every letter moves a single source state, to one target with
/// probability 1 or to two targets with 1/2 each, and fixes every other state.
bool is_sspa(const ProbAutomaton& pa);

/// Model text for the reduction. LocalEffect throws PA-NOT-SSPA unless
/// is_sspa holds.
std::string encode_text(const ProbAutomaton& pa, PaEncoding mode = PaEncoding::Matrix);
ModelFile encode(const ProbAutomaton& pa, PaEncoding mode = PaEncoding::Matrix);

/// Probability of ending in an accepting state after reading `word`
/// (letter indices), by row vector times matrix products.
Rational oracle_accept_prob(const ProbAutomaton& pa, const std::vector<std::size_t>& word);

/// Belief in accepting states after progressing the encoded model's initial
/// KB along the actions for `word`.
Rational encoded_accept_belief(const ModelFile& encoded, const ProbAutomaton& pa, const std::vector<std::size_t>& word);

struct SoundnessReport {
    std::size_t max_len = 0;
    std::size_t words_checked = 0;
    bool ok = true;
    std::vector<std::size_t> first_divergence;
    Rational oracle;
    Rational belief;
};

SoundnessReport soundness_check(const ProbAutomaton& pa, std::size_t max_len, PaEncoding mode = PaEncoding::Matrix,
                                unsigned threads = 1);

/// Random row-stochastic PA with small denominators, for test corpora.
ProbAutomaton random_pa(std::uint64_t seed, std::size_t max_states = 4, std::size_t max_letters = 2);

}  // namespace bp
