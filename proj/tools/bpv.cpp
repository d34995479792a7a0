// bpv: verify, simulate and inspect belief programs.

#include "bp/checker.hpp"
#include "bp/dsl.hpp"
#include "bp/pa.hpp"
#include "bp/parallel.hpp"
#include "bp/simulator.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

using nlohmann::ordered_json;

namespace {

using namespace bp;

constexpr int kExitHolds = 0;
constexpr int kExitViolated = 1;
constexpr int kExitError = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError({Diagnostic{"E-IO", "cannot read '" + path + "'", 0, 0}});
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ModelError({Diagnostic{"E-IO", "cannot write '" + path + "'", 0, 0}});
    out << text;
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return out.str();
}

class Timer {
public:
    void phase(const std::string& name) {
        auto now = std::chrono::steady_clock::now();
        ms_[name] = std::chrono::duration<double, std::milli>(now - last_).count();
        last_ = now;
    }
    ordered_json json() const {
        ordered_json js = ordered_json::object();
        for (const auto& [k, v] : ms_) js[k + "_ms"] = std::round(v * 1000) / 1000;
        return js;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
    std::map<std::string, double> ms_;
};

struct Loaded {
    std::string path;
    std::string text;
    ModelFile model;
};

Loaded load(const std::string& path) {
    Loaded l{path, read_file(path), {}};
    l.model = parse_model(l.text);
    auto diags = validate_restrictions(l.model);
    if (!diags.empty()) throw ModelError(std::move(diags));
    return l;
}

// Representative worlds from whichever source was given.
struct RepsOptions {
    std::vector<std::string> ranges;
    std::string file;
    bool automatic = false;
};

struct Reps {
    std::vector<World> worlds;
    std::string source;
    std::vector<std::string> caveats;
};

Reps resolve_reps(const ModelFile& m, const RepsOptions& o, std::size_t k) {
    Reps r;
    if (!o.ranges.empty()) {
        r.worlds = reps_from_ranges(m, o.ranges);
        r.source = "range";
    } else if (!o.file.empty()) {
        r.worlds = reps_from_text(m, read_file(o.file));
        r.source = "file";
    } else if (o.automatic) {
        r.worlds = reps_auto(m, k);
        r.source = "auto";
        r.caveats.push_back(
            "representatives were chosen automatically; the verdict covers every initial world only if each one "
            "shares a type with some representative");
    } else if (!m.init.worlds.empty()) {
        r.worlds = m.init.worlds;
        r.source = "model";
    } else {
        throw ModelError({Diagnostic{"T-REPS-EMPTY",
                                     "no representative worlds: use --reps-range, --reps-file or --reps-auto", 0, 0}});
    }
    if (r.source != "auto")
        r.caveats.push_back("the verdict covers initial worlds that share a type with a listed representative");
    check_representatives(m, r.worlds);
    return r;
}

void add_reps_flags(CLI::App* cmd, RepsOptions& o) {
    cmd->add_option("--reps-range", o.ranges, "Representative grid, e.g. h=-2..0 (repeat per fluent)");
    cmd->add_option("--reps-file", o.file, "File with one valuation per line");
    cmd->add_flag("--reps-auto", o.automatic, "Derive representatives from the model's constants");
}

struct Analysis {
    CharGraph graph;
    TypeAnalysis types;
    std::vector<FinitePomdp> pomdps;
};

Analysis analyse(const ModelFile& m, std::size_t k, const std::vector<World>& reps, const StatePtr& phi,
                 unsigned threads, Timer& timer) {
    Analysis a;
    a.graph = build_graph(m.program);
    timer.phase("graph");
    TypeOptions to;
    to.threads = threads;
    a.types = compute_types(m, k, reps, phi, to);
    timer.phase("types");
    a.pomdps.resize(a.types.types.size());
    parallel_chunks(a.pomdps.size(), threads, [&](std::size_t lo, std::size_t hi, unsigned) {
        for (std::size_t t = lo; t < hi; ++t) a.pomdps[t] = build_pomdp(m, a.graph, a.types, t);
    });
    timer.phase("pomdp");
    return a;
}

ordered_json world_list(const ModelFile& m, const std::vector<World>& ws) {
    ordered_json js = ordered_json::array();
    for (const auto& w : ws) js.push_back(render_world(m, w));
    return js;
}

ordered_json types_json(const ModelFile& m, const Analysis& a) {
    ordered_json js;
    js["count"] = a.types.types.size();
    js["horizon"] = a.types.k;
    js["context_size"] = a.types.context.size();
    js["sequences"] = a.types.table.seqs.size();
    js["full_sequence_count"] = a.types.full_sequence_count;
    js["pruned_sequences"] = a.types.pruned_sequences;
    js["notes"] = a.types.notes;
    js["types"] = ordered_json::array();
    for (std::size_t t = 0; t < a.types.types.size(); ++t)
        js["types"].push_back({{"id", t + 1},
                               {"witness", render_world(m, a.types.types[t].witness)},
                               {"members", world_list(m, a.types.types[t].members)}});
    return js;
}

ordered_json pomdps_json(const ModelFile& m, const Analysis& a) {
    ordered_json js = ordered_json::array();
    std::map<std::string, std::size_t> groups;
    for (std::size_t t = 0; t < a.pomdps.size(); ++t) {
        const FinitePomdp& p = a.pomdps[t];
        auto [it, fresh] = groups.emplace(pomdp_fingerprint(m, a.types, p), groups.size() + 1);
        js.push_back({{"type", t + 1},
                      {"states", p.states.size()},
                      {"observations", p.observations.size()},
                      {"transitions", p.transition_count()},
                      {"breakdown_branches", p.breakdown_branches},
                      {"nonuniform_observations", p.nonuniform_observations},
                      {"fingerprint_group", it->second}});
    }
    return js;
}

std::size_t fingerprint_groups(const ModelFile& m, const Analysis& a) {
    std::set<std::string> s;
    for (const auto& p : a.pomdps) s.insert(pomdp_fingerprint(m, a.types, p));
    return s.size();
}

ordered_json verdict_json(const ModelFile& m, const Analysis& a, const std::string& name, const Verdict& v) {
    ordered_json js;
    js["property"] = name;
    js["formula"] = v.property;
    js["holds"] = v.holds;
    js["per_type"] = ordered_json::array();
    for (const auto& tv : v.per_type) {
        ordered_json t;
        t["type"] = tv.type + 1;
        t["witness"] = render_world(m, tv.witness);
        t["holds"] = tv.holds;
        t["policies"] = tv.space.count;
        t["probabilities"] = ordered_json::array();
        for (const auto& r : tv.probs) {
            t["probabilities"].push_back(
                {{"formula", r.formula},
                 {"min", to_string(r.min)},
                 {"max", to_string(r.max)},
                 {"holds", r.holds},
                 {"argmin", describe_policy(m, a.pomdps[tv.type], tv.space, r.argmin)},
                 {"argmax", describe_policy(m, a.pomdps[tv.type], tv.space, r.argmax)}});
        }
        js["per_type"].push_back(std::move(t));
    }
    return js;
}

void print_diagnostics(const std::vector<Diagnostic>& ds) {
    for (const auto& d : ds) std::cerr << "error: " << d.to_string() << "\n";
}

ordered_json diagnostics_json(const std::vector<Diagnostic>& ds) {
    ordered_json js = ordered_json::array();
    for (const auto& d : ds) js.push_back({{"code", d.code}, {"message", d.message}, {"line", d.line}, {"column", d.column}});
    return js;
}

// Runs `fn`, mapping library errors to exit code 2 with diagnostics on stderr.
int guarded(const std::string& format, const std::function<int()>& fn) {
    std::vector<Diagnostic> ds;
    try {
        return fn();
    } catch (const ModelError& e) {
        ds = e.diagnostics();
    } catch (const EvalError& e) {
        ds.push_back({e.code(), e.what(), 0, 0});
    } catch (const std::exception& e) {
        ds.push_back({"E-INTERNAL", e.what(), 0, 0});
    }
    print_diagnostics(ds);
    if (format == "json") std::cout << ordered_json{{"error", diagnostics_json(ds)}}.dump(2) << "\n";
    return kExitError;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyOptions {
    std::string model;
    std::vector<std::string> properties;
    std::string formula;
    RepsOptions reps;
    std::uint64_t policy_cap = 0;
    unsigned threads = 1;
    std::string format = "text";
    std::string output;
    std::string witness_prefix;
};

int run_verify(const VerifyOptions& o) {
    Timer timer;
    Loaded l = load(o.model);
    const ModelFile& m = l.model;
    timer.phase("parse");

    std::vector<std::pair<std::string, StatePtr>> props;
    if (!o.formula.empty()) props.push_back({"formula", parse_state_formula(m, o.formula)});
    for (const auto& name : o.properties) {
        auto it = std::find_if(m.properties.begin(), m.properties.end(), [&](const auto& p) { return p.name == name; });
        if (it == m.properties.end())
            throw ModelError({Diagnostic{"E-UNDECLARED", "no property named '" + name + "'", 0, 0}});
        props.push_back({name, it->formula});
    }
    if (props.empty())
        for (const auto& p : m.properties) props.push_back({p.name, p.formula});
    if (props.empty()) throw ModelError({Diagnostic{"E-UNDECLARED", "the model declares no property", 0, 0}});

    // Admissibility first: an unbounded property is rejected before any work.
    std::size_t k = 0;
    for (const auto& [name, phi] : props) k = std::max(k, horizon_of(phi));
    StatePtr context_phi = props.front().second;
    for (std::size_t i = 1; i < props.size(); ++i) {
        auto both = std::make_shared<StateFormula>();
        both->kind = StateFormula::Kind::And;
        both->args = {context_phi, props[i].second};
        context_phi = both;
    }

    Reps reps = resolve_reps(m, o.reps, k);
    timer.phase("representatives");
    Analysis a = analyse(m, k, reps.worlds, context_phi, o.threads, timer);

    CheckOptions co;
    co.policy_cap = o.policy_cap ? o.policy_cap : default_policy_cap();
    co.threads = o.threads;
    std::vector<Verdict> verdicts;
    for (const auto& [name, phi] : props) verdicts.push_back(check(m, a.types, a.pomdps, phi, co));
    timer.phase("check");

    bool holds = true;
    for (const auto& v : verdicts) holds = holds && v.holds;

    std::vector<std::string> warnings;
    for (const auto& v : verdicts)
        for (const auto& w : v.warnings) warnings.push_back(w);
    for (std::size_t t = 0; t < a.pomdps.size(); ++t) {
        const FinitePomdp& p = a.pomdps[t];
        if (p.breakdown_branches)
            warnings.push_back("type " + std::to_string(t + 1) + ": " + std::to_string(p.breakdown_branches) +
                               " belief-breakdown branch(es) lead to the sink");
        if (p.nonuniform_observations)
            warnings.push_back("type " + std::to_string(t + 1) + ": " + std::to_string(p.nonuniform_observations) +
                               " observation(s) offer different options at different program points");
    }
    for (const auto& c : reps.caveats) warnings.push_back(c);

    if (!o.witness_prefix.empty()) {
        for (std::size_t i = 0; i < verdicts.size(); ++i)
            for (const auto& tv : verdicts[i].per_type)
                for (std::size_t j = 0; j < tv.probs.size(); ++j) {
                    std::string base = o.witness_prefix + "." + props[i].first + ".t" + std::to_string(tv.type + 1) +
                                       (tv.probs.size() > 1 ? ".p" + std::to_string(j + 1) : "");
                    const FinitePomdp& p = a.pomdps[tv.type];
                    write_file(base + ".min.json",
                               strategy_to_json(strategy_from_policy(m, p, tv.space, tv.probs[j].argmin)));
                    write_file(base + ".max.json",
                               strategy_to_json(strategy_from_policy(m, p, tv.space, tv.probs[j].argmax)));
                }
    }

    ordered_json report;
    report["command"] = "verify";
    report["model"] = {{"path", l.path}, {"sha256", sha256_hex(l.text)}};
    report["representatives"] = {{"source", reps.source}, {"worlds", world_list(m, reps.worlds)}};
    report["types"] = types_json(m, a);
    report["pomdps"] = pomdps_json(m, a);
    report["distinct_pomdps"] = fingerprint_groups(m, a);
    report["verdicts"] = ordered_json::array();
    for (std::size_t i = 0; i < verdicts.size(); ++i)
        report["verdicts"].push_back(verdict_json(m, a, props[i].first, verdicts[i]));
    report["holds"] = holds;
    report["warnings"] = warnings;
    report["timing"] = timer.json();
    if (!o.output.empty()) write_file(o.output, report.dump(2) + "\n");

    if (o.format == "json") {
        std::cout << report.dump(2) << "\n";
    } else {
        std::cout << "model " << l.path << " (sha256 " << sha256_hex(l.text).substr(0, 16) << ")\n";
        std::cout << "representatives (" << reps.source << "):";
        for (const auto& w : reps.worlds) std::cout << " " << render_world(m, w);
        std::cout << "\nhorizon " << k << ", " << a.types.types.size() << " type(s), " << fingerprint_groups(m, a)
                  << " distinct POMDP(s)\n";
        for (const auto& n : a.types.notes) std::cout << "  note: " << n << "\n";
        for (std::size_t t = 0; t < a.pomdps.size(); ++t) {
            const FinitePomdp& p = a.pomdps[t];
            std::cout << "  type " << t + 1 << " witness " << render_world(m, a.types.types[t].witness) << ": "
                      << p.states.size() << " states, " << p.observations.size() << " observations, "
                      << p.transition_count() << " transitions\n";
        }
        for (std::size_t i = 0; i < verdicts.size(); ++i) {
            const Verdict& v = verdicts[i];
            std::cout << "property " << props[i].first << ": " << v.property << "\n";
            for (const auto& tv : v.per_type) {
                for (const auto& r : tv.probs) {
                    std::cout << "  type " << tv.type + 1 << " " << render_world(m, tv.witness) << ": "
                              << r.formula << " min " << to_string(r.min) << " max " << to_string(r.max) << " over "
                              << r.policy_count << " polic" << (r.policy_count == 1 ? "y" : "ies")
                              << (r.holds ? "" : "  VIOLATED") << "\n";
                    if (r.policy_count > 1) {
                        for (const auto& line : describe_policy(m, a.pomdps[tv.type], tv.space, r.argmax))
                            std::cout << "    argmax: " << line << "\n";
                        for (const auto& line : describe_policy(m, a.pomdps[tv.type], tv.space, r.argmin))
                            std::cout << "    argmin: " << line << "\n";
                    }
                }
            }
            std::cout << "  verdict: " << (v.holds ? "holds" : "violated") << "\n";
        }
        for (const auto& w : warnings) std::cout << "warning: " << w << "\n";
    }
    return holds ? kExitHolds : kExitViolated;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
    std::string model;
    std::string world;
    std::string policy = "first-enabled";
    std::size_t trials = 10000;
    std::size_t horizon = 10;
    std::uint64_t seed = 42;
    std::string psi;
    std::string property;
    unsigned threads = 1;
    std::string format = "text";
    std::size_t show_traces = 0;
};

int run_simulate(const SimulateOptions& o) {
    Timer timer;
    Loaded l = load(o.model);
    const ModelFile& m = l.model;
    World w0 = o.world.empty() ? (m.init.worlds.empty() ? World{} : m.init.worlds.front()) : parse_valuation(m, o.world);
    if (w0.empty()) throw ModelError({Diagnostic{"S-WORLD", "no initial world: use --world", 0, 0}});
    TracePtr psi;
    std::string label;
    if (!o.psi.empty()) {
        psi = parse_trace_formula(m, o.psi);
        label = o.psi;
    } else {
        std::string name = o.property.empty() && !m.properties.empty() ? m.properties.front().name : o.property;
        auto it = std::find_if(m.properties.begin(), m.properties.end(), [&](const auto& p) { return p.name == name; });
        if (it == m.properties.end())
            throw ModelError({Diagnostic{"E-UNDECLARED", "no property '" + name + "' and no --psi", 0, 0}});
        std::function<TracePtr(const StatePtr&)> first = [&](const StatePtr& s) -> TracePtr {
            if (s->kind == StateFormula::Kind::Prob) return s->trace;
            for (const auto& a : s->args)
                if (auto t = first(a)) return t;
            return nullptr;
        };
        psi = first(it->formula);
        if (!psi) throw ModelError({Diagnostic{"E-UNDECLARED", "property '" + name + "' has no P operator", 0, 0}});
        label = name;
    }
    Strategy strategy = parse_strategy(o.policy);
    timer.phase("parse");
    EstimateOptions eo;
    eo.trials = o.trials;
    eo.horizon = o.horizon;
    eo.seed = o.seed;
    eo.threads = o.threads;
    Estimate e = estimate(m, psi, w0, strategy, eo);
    timer.phase("simulate");

    std::vector<ordered_json> traces;
    if (o.show_traces) {
        CharGraph g = build_graph(m.program);
        for (std::size_t i = 0; i < o.show_traces; ++i) {
            TraceRecord r = run_trace(m, g, w0, strategy, o.horizon, o.seed, i);
            ordered_json t;
            std::vector<std::string> acts;
            for (const auto& a : r.actions) acts.push_back(print_ground_action(m, a));
            t["actions"] = acts;
            t["outcome"] = outcome_name(r.outcome);
            t["likelihood"] = to_string(r.likelihood);
            traces.push_back(std::move(t));
        }
    }

    ordered_json report;
    report["command"] = "simulate";
    report["model"] = {{"path", l.path}, {"sha256", sha256_hex(l.text)}};
    report["world"] = render_world(m, w0);
    report["psi"] = print_trace_formula(psi);
    report["policy"] = o.policy;
    report["trials"] = e.trials;
    report["horizon"] = o.horizon;
    report["seed"] = o.seed;
    report["successes"] = e.successes;
    report["estimate"] = e.estimate;
    report["half_width"] = e.half_width;
    report["interval"] = {e.lower(), e.upper()};
    report["lower_bound_only"] = e.lower_bound_only;
    report["outcomes"] = e.outcomes;
    report["notes"] = e.notes;
    if (!traces.empty()) report["traces"] = traces;
    report["timing"] = timer.json();

    if (o.format == "json") {
        std::cout << report.dump(2) << "\n";
    } else {
        std::cout << "simulate " << label << ": " << print_trace_formula(psi) << "\n";
        std::cout << "world " << render_world(m, w0) << ", policy " << o.policy << ", " << e.trials
                  << " trials, horizon " << o.horizon << ", seed " << o.seed << "\n";
        std::cout << std::setprecision(6) << "estimate " << e.estimate << " +/- " << e.half_width << " (95% ["
                  << e.lower() << ", " << e.upper() << "]), " << e.successes << "/" << e.trials << "\n";
        std::cout << "outcomes:";
        for (const auto& [k, v] : e.outcomes) std::cout << " " << k << "=" << v;
        std::cout << "\n";
        for (const auto& t : traces)
            std::cout << "trace: " << t["actions"].dump() << " " << t["outcome"].get<std::string>() << " likelihood "
                      << t["likelihood"].get<std::string>() << "\n";
        for (const auto& n : e.notes) std::cout << "note: " << n << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// progress

int run_progress(const std::string& model, const std::vector<std::string>& actions, const std::string& format) {
    Loaded l = load(model);
    const ModelFile& m = l.model;
    KnowledgeBase kb = initial_kb(m);
    ordered_json steps = ordered_json::array();
    steps.push_back({{"action", nullptr}, {"distribution", render_distribution(m, kb.dist)}});
    if (format != "json") std::cout << "initial: " << render_distribution(m, kb.dist) << "\n";
    for (const auto& text : actions) {
        GroundAction t = parse_ground_action(m, text);
        kb = progress_kb(m, kb, t);
        std::string d = render_distribution(m, kb.dist);
        steps.push_back({{"action", print_ground_action(m, t)}, {"distribution", d}});
        if (format != "json") std::cout << print_ground_action(m, t) << ": " << d << "\n";
    }
    if (format == "json") std::cout << ordered_json{{"command", "progress"}, {"steps", steps}}.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// exports

struct ExportOptions {
    std::string model;
    std::string property;
    std::size_t k = 0;
    bool k_given = false;
    RepsOptions reps;
    std::size_t type = 0;  // 1-based; 0 means all
    std::string format = "json";
    std::string output;
    unsigned threads = 1;
};

void emit(const std::string& output, const std::string& text) {
    if (output.empty() || output == "-")
        std::cout << text;
    else
        write_file(output, text);
}

int run_export_pomdp(const ExportOptions& o) {
    Timer timer;
    Loaded l = load(o.model);
    const ModelFile& m = l.model;
    StatePtr phi;
    if (!o.property.empty()) {
        auto it = std::find_if(m.properties.begin(), m.properties.end(), [&](const auto& p) { return p.name == o.property; });
        if (it == m.properties.end())
            throw ModelError({Diagnostic{"E-UNDECLARED", "no property named '" + o.property + "'", 0, 0}});
        phi = it->formula;
    }
    std::size_t k = o.k_given ? o.k : phi ? horizon_of(phi) : 0;
    if (!o.k_given && !phi) throw ModelError({Diagnostic{"E-UNDECLARED", "give --property or --k", 0, 0}});
    Reps reps = resolve_reps(m, o.reps, k);
    Analysis a = analyse(m, k, reps.worlds, phi, o.threads, timer);
    std::vector<std::size_t> which;
    if (o.type) {
        if (o.type > a.pomdps.size())
            throw ModelError({Diagnostic{"E-UNDECLARED", "there are only " + std::to_string(a.pomdps.size()) + " types", 0, 0}});
        which.push_back(o.type - 1);
    } else {
        for (std::size_t t = 0; t < a.pomdps.size(); ++t) which.push_back(t);
    }
    std::string out;
    if (o.format == "dot") {
        for (auto t : which) out += pomdp_to_dot(m, a.types, a.pomdps[t]);
    } else if (which.size() == 1) {
        out = pomdp_to_json(m, a.types, a.pomdps[which[0]], which[0]) + "\n";
    } else {
        ordered_json arr = ordered_json::array();
        for (auto t : which) arr.push_back(ordered_json::parse(pomdp_to_json(m, a.types, a.pomdps[t], t)));
        out = arr.dump(2) + "\n";
    }
    emit(o.output, out);
    return 0;
}

int run_export_graph(const std::string& model, const std::string& format, const std::string& output) {
    Loaded l = load(model);
    const ModelFile& m = l.model;
    CharGraph g = build_graph(m.program);
    if (format == "dot") {
        emit(output, graph_to_dot(m, g));
        return 0;
    }
    ordered_json js;
    js["nodes"] = ordered_json::array();
    for (std::size_t v = 0; v < g.nodes.size(); ++v)
        js["nodes"].push_back({{"id", v},
                               {"program", print_program(m, g.nodes[v])},
                               {"fin", print(g.fin[v])},
                               {"fail", print(g.fail[v])},
                               {"nil", v == g.nil_node}});
    js["edges"] = ordered_json::array();
    for (const auto& e : g.edges)
        js["edges"].push_back({{"source", e.source},
                               {"target", e.target},
                               {"action", print_primitive(m, e.rho)},
                               {"guard", print(e.guard)}});
    emit(output, js.dump(2) + "\n");
    return 0;
}

int run_encode_pa(const std::string& input, const std::string& output, bool local, std::size_t check_len,
                  const std::string& format) {
    ProbAutomaton pa = pa_from_json(read_file(input));
    PaEncoding mode = local ? PaEncoding::LocalEffect : PaEncoding::Matrix;
    std::string text = encode_text(pa, mode);
    emit(output, text);
    if (check_len == 0) return 0;
    SoundnessReport r = soundness_check(pa, check_len, mode);
    std::ostream& log = output.empty() || output == "-" ? std::cerr : std::cout;
    if (format == "json") {
        ordered_json js{{"words_checked", r.words_checked}, {"max_len", r.max_len}, {"ok", r.ok}};
        if (!r.ok)
            js["first_divergence"] = {{"word", r.first_divergence},
                                      {"oracle", to_string(r.oracle)},
                                      {"belief", to_string(r.belief)}};
        log << js.dump(2) << "\n";
    } else {
        log << "soundness: " << r.words_checked << " word(s) up to length " << r.max_len << ", "
            << (r.ok ? "all equal" : "divergence") << "\n";
        if (!r.ok) {
            log << "  word";
            for (auto i : r.first_divergence) log << " " << pa.alphabet[i];
            log << ": oracle " << to_string(r.oracle) << ", belief " << to_string(r.belief) << "\n";
        }
    }
    return r.ok ? 0 : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bpv: verification and simulation of belief programs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "bpv 0.1.0");
    std::string format = "text";
    auto add_format = [&](CLI::App* cmd, std::string& target, std::vector<std::string> allowed) {
        cmd->add_option("--format", target, "Output format")->check(CLI::IsMember(allowed));
    };

    VerifyOptions vo;
    auto* verify = app.add_subcommand("verify", "Check bounded properties for every type of initial world");
    verify->add_option("model", vo.model, "Model file")->required();
    verify->add_option("--property", vo.properties, "Property name (repeatable; default: all)");
    verify->add_option("--formula", vo.formula, "Inline state formula");
    add_reps_flags(verify, vo.reps);
    verify->add_option("--policy-cap", vo.policy_cap, "Maximum number of proper policies (default 1e6, env BP_POLICY_CAP)");
    verify->add_option("--threads", vo.threads, "Worker threads, 0 for all cores");
    verify->add_option("-o,--output", vo.output, "Also write the JSON report here");
    verify->add_option("--witness-policies", vo.witness_prefix, "Write argmin/argmax policies as PREFIX.*.json");
    add_format(verify, vo.format, {"text", "json"});

    SimulateOptions so;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimate of a trace formula");
    simulate->add_option("model", so.model, "Model file")->required();
    simulate->add_option("--world", so.world, "Initial world, e.g. h=0 (default: first init world)");
    simulate->add_option("--policy", so.policy, "first-enabled, uniform-random, or a policy JSON file");
    simulate->add_option("--trials", so.trials, "Number of trials")->check(CLI::PositiveNumber);
    simulate->add_option("--horizon", so.horizon, "Maximum actions per trial");
    simulate->add_option("--seed", so.seed, "Random seed");
    simulate->add_option("--psi", so.psi, "Trace formula, e.g. \"F<=2 B(h = 2) = 1\"");
    simulate->add_option("--property", so.property, "Use the first P operator of this property");
    simulate->add_option("--threads", so.threads, "Worker threads, 0 for all cores");
    simulate->add_option("--show-traces", so.show_traces, "Print the first N traces");
    add_format(simulate, so.format, {"text", "json"});

    std::string pmodel;
    std::vector<std::string> pactions;
    std::string pformat = "text";
    auto* progress = app.add_subcommand("progress", "Progress the initial KB through ground actions");
    progress->add_option("model", pmodel, "Model file")->required();
    progress->add_option("actions", pactions, "Ground actions, e.g. east(1,1) sencfe(1)");
    add_format(progress, pformat, {"text", "json"});

    ExportOptions eo;
    auto* export_pomdp = app.add_subcommand("export-pomdp", "Write the per-type POMDPs");
    export_pomdp->add_option("model", eo.model, "Model file")->required();
    export_pomdp->add_option("--property", eo.property, "Property fixing the horizon and context");
    export_pomdp->add_option("--k", eo.k, "Horizon (overrides the property's)")->each([&](const std::string&) {
        eo.k_given = true;
    });
    add_reps_flags(export_pomdp, eo.reps);
    export_pomdp->add_option("--type", eo.type, "Only this type (1-based)");
    export_pomdp->add_option("-o,--output", eo.output, "Output file (default stdout)");
    export_pomdp->add_option("--threads", eo.threads, "Worker threads");
    add_format(export_pomdp, eo.format, {"json", "dot"});
    export_pomdp->add_flag_callback("--json", [&] { eo.format = "json"; }, "Same as --format json");
    export_pomdp->add_flag_callback("--dot", [&] { eo.format = "dot"; }, "Same as --format dot");

    std::string gmodel, gformat = "dot", goutput;
    auto* export_graph = app.add_subcommand("export-graph", "Write the characteristic program graph");
    export_graph->add_option("model", gmodel, "Model file")->required();
    export_graph->add_option("-o,--output", goutput, "Output file (default stdout)");
    add_format(export_graph, gformat, {"dot", "json"});
    export_graph->add_flag_callback("--json", [&] { gformat = "json"; }, "Same as --format json");
    export_graph->add_flag_callback("--dot", [&] { gformat = "dot"; }, "Same as --format dot");

    std::string pa_in, pa_out, pa_format = "text";
    bool pa_local = false;
    std::size_t pa_check = 0;
    auto* encode_pa = app.add_subcommand("encode-pa", "Encode a probabilistic automaton as a belief program");
    encode_pa->add_option("automaton", pa_in, "Automaton JSON")->required();
    encode_pa->add_option("-o,--output", pa_out, "Model file to write (default stdout)");
    encode_pa->add_flag("--local-effect", pa_local, "Local-effect encoding (extension, SSPA shape only)");
    encode_pa->add_option("--check", pa_check, "Compare against the matrix oracle for words up to this length");
    add_format(encode_pa, pa_format, {"text", "json"});

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitError;
    }

    if (*verify) return guarded(vo.format, [&] { return run_verify(vo); });
    if (*simulate) return guarded(so.format, [&] { return run_simulate(so); });
    if (*progress) return guarded(pformat, [&] { return run_progress(pmodel, pactions, pformat); });
    if (*export_pomdp) return guarded("text", [&] { return run_export_pomdp(eo); });
    if (*export_graph) return guarded("text", [&] { return run_export_graph(gmodel, gformat, goutput); });
    if (*encode_pa) return guarded(pa_format, [&] { return run_encode_pa(pa_in, pa_out, pa_local, pa_check, pa_format); });
    return kExitError;
}
