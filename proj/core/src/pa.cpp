#include "bp/pa.hpp"

#include "bp/dsl.hpp"
#include "bp/parallel.hpp"
#include "bp/simulator.hpp"

#include "json.hpp"

#include <sstream>

namespace bp {

namespace {

[[noreturn]] void fail(const char* code, const std::string& message) {
    throw ModelError({Diagnostic{code, message, 0, 0}});
}

std::string state_name(std::size_t q) {
    return std::to_string(q + 1);
}

std::string action_name(std::size_t letter) {
    return "rho" + std::to_string(letter + 1);
}

std::string accepting_formula(const ProbAutomaton& pa) {
    if (pa.accepting.empty()) return "false";
    std::string s = "hs in {";
    for (std::size_t i = 0; i < pa.accepting.size(); ++i) s += (i ? ", " : "") + state_name(pa.accepting[i]);
    return s + "}";
}

// Source row and its targets for an SSPA letter.
struct LocalMove {
    std::size_t source = 0;
    std::vector<std::size_t> targets;
};

std::optional<LocalMove> local_move(const ProbAutomaton& pa, std::size_t letter) {
    const auto& mat = pa.matrices[letter];
    std::optional<LocalMove> move;
    for (std::size_t q = 0; q < pa.states; ++q) {
        bool identity = true;
        for (std::size_t r = 0; r < pa.states; ++r) identity = identity && mat[q][r] == (q == r ? 1 : 0);
        if (identity) continue;
        if (move) return std::nullopt;  // two moving rows
        LocalMove m{q, {}};
        std::vector<Rational> weights;
        for (std::size_t r = 0; r < pa.states; ++r)
            if (mat[q][r] != 0) m.targets.push_back(r), weights.push_back(mat[q][r]);
        if (m.targets.size() == 1 && weights[0] != 1) return std::nullopt;
        if (m.targets.size() == 2 && (weights[0] != Rational(1, 2) || weights[1] != Rational(1, 2)))
            return std::nullopt;
        if (m.targets.size() > 2) return std::nullopt;
        move = m;
    }
    // An identity letter is a move of state 1 to itself.
    if (!move) move = LocalMove{0, {0}};
    return move;
}

}  // namespace

void validate_pa(const ProbAutomaton& pa) {
    std::vector<Diagnostic> diags;
    auto add = [&](const char* code, const std::string& msg) { diags.push_back({code, msg, 0, 0}); };
    if (pa.states == 0) add("PA-SHAPE", "automaton has no states");
    if (pa.alphabet.empty()) add("PA-SHAPE", "automaton has no letters");
    if (pa.matrices.size() != pa.alphabet.size()) add("PA-SHAPE", "one matrix per letter is required");
    if (pa.initial >= pa.states) add("PA-SHAPE", "initial state out of range");
    for (auto q : pa.accepting)
        if (q >= pa.states) add("PA-SHAPE", "accepting state " + std::to_string(q) + " out of range");
    if (pa.threshold < 0 || pa.threshold > 1) add("PA-SHAPE", "threshold outside [0, 1]");
    for (std::size_t l = 0; l < pa.matrices.size(); ++l) {
        const auto& mat = pa.matrices[l];
        if (mat.size() != pa.states) {
            add("PA-SHAPE", "matrix for '" + pa.alphabet.at(l) + "' has " + std::to_string(mat.size()) + " rows");
            continue;
        }
        for (std::size_t q = 0; q < mat.size(); ++q) {
            if (mat[q].size() != pa.states) {
                add("PA-SHAPE", "row " + std::to_string(q) + " of '" + pa.alphabet[l] + "' has the wrong width");
                continue;
            }
            Rational sum = 0;
            bool range = true;
            for (const auto& x : mat[q]) {
                sum += x;
                range = range && x >= 0 && x <= 1;
            }
            if (!range || sum != 1)
                add("PA-ROW-SUM", "row " + std::to_string(q) + " of '" + pa.alphabet[l] + "' sums to " + to_string(sum));
        }
    }
    if (!diags.empty()) throw ModelError(std::move(diags));
}

ProbAutomaton pa_from_json(const std::string& text) {
    ProbAutomaton pa;
    auto frac = [](const nlohmann::json& j) {
        std::string s = j.is_string() ? j.get<std::string>() : j.dump();
        auto r = parse_rational(s);
        if (!r) fail("PA-SHAPE", "'" + s + "' is not a fraction");
        return *r;
    };
    try {
        auto js = nlohmann::json::parse(text);
        pa.states = js.at("states").get<std::size_t>();
        pa.alphabet = js.at("alphabet").get<std::vector<std::string>>();
        for (const auto& mat : js.at("matrices")) {
            std::vector<std::vector<Rational>> rows;
            for (const auto& row : mat) {
                std::vector<Rational> r;
                for (const auto& x : row) r.push_back(frac(x));
                rows.push_back(std::move(r));
            }
            pa.matrices.push_back(std::move(rows));
        }
        pa.initial = js.value("initial", std::size_t{0});
        pa.accepting = js.at("accepting").get<std::vector<std::size_t>>();
        pa.threshold = js.contains("threshold") ? frac(js["threshold"]) : Rational(1, 2);
    } catch (const nlohmann::json::exception& e) {
        fail("PA-SHAPE", std::string("malformed automaton: ") + e.what());
    }
    validate_pa(pa);
    return pa;
}

std::string pa_to_json(const ProbAutomaton& pa) {
    nlohmann::json js;
    js["states"] = pa.states;
    js["alphabet"] = pa.alphabet;
    js["matrices"] = nlohmann::json::array();
    for (const auto& mat : pa.matrices) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : mat) {
            nlohmann::json r = nlohmann::json::array();
            for (const auto& x : row) r.push_back(to_string(x));
            rows.push_back(r);
        }
        js["matrices"].push_back(rows);
    }
    js["initial"] = pa.initial;
    js["accepting"] = pa.accepting;
    js["threshold"] = to_string(pa.threshold);
    return js.dump(2);
}

bool is_sspa(const ProbAutomaton& pa) {
    for (std::size_t l = 0; l < pa.matrices.size(); ++l)
        if (!local_move(pa, l)) return false;
    return true;
}

std::string encode_text(const ProbAutomaton& pa, PaEncoding mode) {
    validate_pa(pa);
    if (mode == PaEncoding::LocalEffect && !is_sspa(pa))
        fail("PA-NOT-SSPA", "local-effect encoding needs one moving state per letter with weights 1 or 1/2, 1/2");
    std::ostringstream out;
    out << "// Encoded probabilistic automaton with " << pa.states << " states.\n";
    if (mode == PaEncoding::LocalEffect) out << "// Local-effect variant (extension): effects depend on hs, weights do not.\n";
    out << "fluents { hs }\n";
    for (std::size_t l = 0; l < pa.alphabet.size(); ++l) {
        out << "\n// letter " << pa.alphabet[l] << "\n";
        out << "action " << action_name(l) << " stochastic(; y) {\n  outcomes: ";
        if (mode == PaEncoding::Matrix) {
            for (std::size_t r = 0; r < pa.states; ++r) out << (r ? ", " : "") << "(" << state_name(r) << ")";
            out << ";\n  likelihood {\n";
            for (std::size_t q = 0; q < pa.states; ++q) {
                out << "    when hs = " << state_name(q) << ":";
                for (std::size_t r = 0; r < pa.states; ++r) out << (r ? ", " : " ") << to_string(pa.matrices[l][q][r]);
                out << ";\n";
            }
        } else {
            LocalMove mv = *local_move(pa, l);
            for (std::size_t i = 0; i < mv.targets.size(); ++i) out << (i ? ", " : "") << "(" << state_name(mv.targets[i]) << ")";
            out << ";\n  likelihood {\n    when true:";
            for (std::size_t i = 0; i < mv.targets.size(); ++i) out << (i ? ", " : " ") << (mv.targets.size() == 1 ? "1" : "1/2");
            out << ";\n";
        }
        out << "  }\n}\n";
    }
    out << "\nssa hs {\n";
    for (std::size_t l = 0; l < pa.alphabet.size(); ++l) {
        out << "  case " << action_name(l) << "(y): ";
        if (mode == PaEncoding::Matrix) {
            out << "y;\n";
        } else {
            out << "if hs = " << state_name(local_move(pa, l)->source) << " then y else hs end;\n";
        }
    }
    out << "}\n\n";
    out << "init {\n  constraints: hs = " << state_name(pa.initial) << ";\n  worlds: {hs = " << state_name(pa.initial)
        << "};\n}\n\n";
    out << "belief { {hs = " << state_name(pa.initial) << "}: 1 }\n\n";
    out << "program {\n  while B(" << accepting_formula(pa) << ") < " << to_string(pa.threshold) << " do\n    ";
    for (std::size_t l = 0; l + 1 < pa.alphabet.size(); ++l) out << "choose { " << action_name(l) << "; } or { ";
    out << action_name(pa.alphabet.size() - 1) << ";";
    for (std::size_t l = 0; l + 1 < pa.alphabet.size(); ++l) out << " }";
    out << "\n  end\n}\n\n";
    out << "property Reach { P>0 [F B(" << accepting_formula(pa) << ") >= " << to_string(pa.threshold) << "] }\n";
    return out.str();
}

ModelFile encode(const ProbAutomaton& pa, PaEncoding mode) {
    return parse_model(encode_text(pa, mode));
}

Rational oracle_accept_prob(const ProbAutomaton& pa, const std::vector<std::size_t>& word) {
    std::vector<Rational> v(pa.states, Rational(0));
    v[pa.initial] = 1;
    for (std::size_t l : word) {
        if (l >= pa.matrices.size()) fail("PA-SHAPE", "letter index out of range");
        std::vector<Rational> next(pa.states, Rational(0));
        for (std::size_t q = 0; q < pa.states; ++q) {
            if (v[q] == 0) continue;
            for (std::size_t r = 0; r < pa.states; ++r) next[r] += v[q] * pa.matrices[l][q][r];
        }
        v = std::move(next);
    }
    Rational p = 0;
    for (std::size_t q : pa.accepting) p += v[q];
    return p;
}

Rational encoded_accept_belief(const ModelFile& encoded, const ProbAutomaton& pa, const std::vector<std::size_t>& word) {
    KnowledgeBase kb = initial_kb(encoded);
    auto hs = encoded.find_fluent("hs");
    if (!hs) fail("PA-SHAPE", "encoded model has no fluent hs");
    for (std::size_t l : word) {
        auto aid = encoded.find_action(action_name(l));
        if (!aid) fail("PA-SHAPE", "encoded model has no action " + action_name(l));
        kb = progress_kb(encoded, kb, oi_alternatives(encoded, PrimitiveProgram{*aid, {}}).at(0));
    }
    Rational p = 0;
    for (const auto& [w, mass] : kb.dist)
        for (std::size_t q : pa.accepting)
            if (w[*hs] == Rational(static_cast<long>(q + 1))) p += mass;
    return p;
}

SoundnessReport soundness_check(const ProbAutomaton& pa, std::size_t max_len, PaEncoding mode, unsigned threads) {
    ModelFile m = encode(pa, mode);
    SoundnessReport rep;
    rep.max_len = max_len;
    const std::size_t n = pa.alphabet.size();
    // Words in length-then-lexicographic order.
    std::vector<std::vector<std::size_t>> words{{}};
    for (std::size_t len = 1, start = 0; len <= max_len; ++len) {
        std::size_t end = words.size();
        for (std::size_t i = start; i < end; ++i)
            for (std::size_t l = 0; l < n; ++l) {
                auto w = words[i];
                w.push_back(l);
                words.push_back(std::move(w));
            }
        start = end;
    }
    if (max_len == 0) words.clear();
    std::vector<char> bad(words.size(), 0);
    std::vector<Rational> oracle(words.size()), belief(words.size());
    parallel_chunks(words.size(), threads, [&](std::size_t lo, std::size_t hi, unsigned) {
        for (std::size_t i = lo; i < hi; ++i) {
            oracle[i] = oracle_accept_prob(pa, words[i]);
            belief[i] = encoded_accept_belief(m, pa, words[i]);
            bad[i] = oracle[i] != belief[i];
        }
    });
    rep.words_checked = words.size();
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (!bad[i]) continue;
        rep.ok = false;
        rep.first_divergence = words[i];
        rep.oracle = oracle[i];
        rep.belief = belief[i];
        break;
    }
    return rep;
}

ProbAutomaton random_pa(std::uint64_t seed, std::size_t max_states, std::size_t max_letters) {
    SplitMix64 rng(seed, 0x5041);
    ProbAutomaton pa;
    pa.states = 1 + rng.below(max_states);
    std::size_t letters = 1 + rng.below(max_letters);
    for (std::size_t l = 0; l < letters; ++l) pa.alphabet.push_back(std::string(1, static_cast<char>('a' + l)));
    for (std::size_t l = 0; l < letters; ++l) {
        std::vector<std::vector<Rational>> mat;
        for (std::size_t q = 0; q < pa.states; ++q) {
            std::vector<long> w(pa.states);
            long total = 0;
            for (auto& x : w) total += (x = static_cast<long>(rng.below(4)));
            if (total == 0) w[rng.below(pa.states)] = total = 1;
            std::vector<Rational> row;
            for (long x : w) {
                Rational r(x, total);
                r.canonicalize();
                row.push_back(r);
            }
            mat.push_back(std::move(row));
        }
        pa.matrices.push_back(std::move(mat));
    }
    for (std::size_t q = 0; q < pa.states; ++q)
        if (rng.below(2)) pa.accepting.push_back(q);
    pa.threshold = Rational(static_cast<long>(1 + rng.below(4)), 4);
    pa.threshold.canonicalize();
    return pa;
}

}  // namespace bp
