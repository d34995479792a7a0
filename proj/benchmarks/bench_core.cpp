#include "bp/checker.hpp"
#include "bp/dsl.hpp"
#include "bp/pa.hpp"
#include "bp/simulator.hpp"

#include <benchmark/benchmark.h>

using namespace bp;

namespace {

const ModelFile& coffee() {
    static const ModelFile m = load_model(std::string(BP_MODELS_DIR) + "/coffee.bp");
    return m;
}

std::vector<World> coffee_reps() {
    return reps_from_ranges(coffee(), {"h=-2..0"});
}

StatePtr reach_within(std::size_t k) {
    return parse_state_formula(coffee(), "P>=1/20 [F<=" + std::to_string(k) + " B(h = 2) = 1]");
}

void BM_Parse(benchmark::State& state) {
    std::string text = print_model(coffee());
    for (auto _ : state) benchmark::DoNotOptimize(parse_model(text));
}
BENCHMARK(BM_Parse);

void BM_Progression(benchmark::State& state) {
    const ModelFile& m = coffee();
    KnowledgeBase kb0 = initial_kb(m);
    GroundAction east = parse_ground_action(m, "east(1,1)");
    GroundAction sense = parse_ground_action(m, "sencfe(0)");
    for (auto _ : state) {
        KnowledgeBase kb = progress_kb(m, kb0, east);
        benchmark::DoNotOptimize(progress_kb(m, kb, sense));
    }
}
BENCHMARK(BM_Progression);

// Horizon k sweeps the type table and POMDP sizes.
void BM_Types(benchmark::State& state) {
    std::size_t k = static_cast<std::size_t>(state.range(0));
    StatePtr phi = reach_within(k);
    auto reps = coffee_reps();
    for (auto _ : state) benchmark::DoNotOptimize(compute_types(coffee(), k, reps, phi));
}
BENCHMARK(BM_Types)->DenseRange(1, 4)->Unit(benchmark::kMicrosecond);

void BM_VerifyPipeline(benchmark::State& state) {
    std::size_t k = static_cast<std::size_t>(state.range(0));
    const ModelFile& m = coffee();
    StatePtr phi = reach_within(k);
    auto reps = coffee_reps();
    CharGraph g = build_graph(m.program);
    for (auto _ : state) {
        TypeAnalysis a = compute_types(m, k, reps, phi);
        std::vector<FinitePomdp> ps;
        for (std::size_t t = 0; t < a.types.size(); ++t) ps.push_back(build_pomdp(m, g, a, t));
        benchmark::DoNotOptimize(check(m, a, ps, phi));
    }
}
BENCHMARK(BM_VerifyPipeline)->DenseRange(1, 4)->Unit(benchmark::kMicrosecond);

void BM_Simulate(benchmark::State& state) {
    const ModelFile& m = coffee();
    TracePtr psi = parse_trace_formula(m, "F<=2 B(h = 2) = 1");
    World w0 = parse_valuation(m, "h = 0");
    EstimateOptions o;
    o.trials = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(estimate(m, psi, w0, Strategy{}, o));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_PaSoundness(benchmark::State& state) {
    ProbAutomaton pa = random_pa(3, 4, 2);
    std::size_t len = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(soundness_check(pa, len));
}
BENCHMARK(BM_PaSoundness)->DenseRange(2, 6, 2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
