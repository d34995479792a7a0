#include "doctest.h"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace {

struct Run {
    int code = -1;
    std::string out;
};

// Runs bpv with stderr folded into stdout.
Run bpv(const std::string& args) {
    std::string cmd = std::string("\"") + BPV_PATH + "\" " + args + " 2>&1";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

const std::string coffee = std::string("\"") + BP_MODELS_DIR + "/coffee.bp\"";

std::string temp_path(const std::string& name) {
    return "/tmp/bpv_test_" + std::to_string(getpid()) + "_" + name;
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("verify P1 is violated with exit 1 and reports 1/20") {
    Run r = bpv("verify " + coffee + " --property P1 --reps-range h=-2..0");
    CHECK(r.code == 1);
    CHECK(contains(r.out, "min 1/20 max 1/20"));
    CHECK(contains(r.out, "verdict: violated"));
    CHECK(contains(r.out, "3 type(s)"));
}

TEST_CASE("verify json report") {
    Run r = bpv("verify " + coffee + " --property P1 --reps-range h=-2..0 --format json");
    REQUIRE(r.code == 1);
    auto js = nlohmann::json::parse(r.out);
    CHECK(js["holds"] == false);
    CHECK(js["types"]["count"] == 3);
    CHECK(js["model"]["sha256"].get<std::string>().size() == 64);
    CHECK(js["timing"].contains("check_ms"));
    std::map<std::string, std::string> max_by_witness;
    for (const auto& t : js["verdicts"][0]["per_type"])
        max_by_witness[t["witness"]] = t["probabilities"][0]["max"];
    CHECK(max_by_witness["[h=0]"] == "1/20");
    CHECK(max_by_witness["[h=-1]"] == "0");
    CHECK(max_by_witness["[h=-2]"] == "0");
}

TEST_CASE("verify with a satisfied inline formula exits 0") {
    Run r = bpv("verify " + coffee + " --formula \"P<=1/20 [F<=2 B(h = 2) = 1]\" --reps-range h=-2..0");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "verdict: holds"));
}

TEST_CASE("unbounded property is inadmissible") {
    Run r = bpv("verify " + coffee + " --property P2 --reps-range h=-2..0");
    CHECK(r.code == 2);
    CHECK(contains(r.out, "inadmissible: unbounded until"));
}

TEST_CASE("errors exit 2") {
    CHECK(bpv("verify /nonexistent/model.bp").code == 2);
    CHECK(bpv("verify " + coffee + " --property NOPE --reps-range h=0..0").code == 2);
    CHECK(bpv("frobnicate").code == 2);
    CHECK(bpv("simulate " + coffee + " --world h=0 --policy bogus").code == 2);
    Run bad = bpv("progress " + coffee + " \"teleport(1)\"");
    CHECK(bad.code == 2);
    CHECK(contains(bad.out, "error:"));
}

TEST_CASE("progress prints both successor distributions") {
    Run r = bpv("progress " + coffee + " \"east(1,1)\" \"sencfe(1)\"");
    REQUIRE(r.code == 0);
    CHECK(contains(r.out, "east(1,1): {[h=0]: 1/4, [h=1]: 1/2, [h=2]: 1/4}"));
    CHECK(contains(r.out, "sencfe(1): {[h=2]: 1}"));
}

TEST_CASE("simulate is reproducible and near the exact value") {
    std::string args = "simulate " + coffee + " --world h=0 --psi \"F<=2 B(h = 2) = 1\" --trials 20000 --seed 7 --format json";
    Run a = bpv(args);
    Run b = bpv(args + " --threads 3");
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    auto ja = nlohmann::json::parse(a.out);
    auto jb = nlohmann::json::parse(b.out);
    CHECK(ja["successes"] == jb["successes"]);
    double est = ja["estimate"];
    CHECK(std::abs(est - 0.05) <= ja["half_width"].get<double>());
}

TEST_CASE("exports") {
    Run dot = bpv("export-graph " + coffee);
    CHECK(dot.code == 0);
    CHECK(contains(dot.out, "digraph"));
    Run gj = bpv("export-graph " + coffee + " --format json");
    REQUIRE(gj.code == 0);
    CHECK(nlohmann::json::parse(gj.out)["edges"].size() == 4);

    Run pj = bpv("export-pomdp " + coffee + " --property P1 --reps-range h=-2..0 --type 3");
    REQUIRE(pj.code == 0);
    auto js = nlohmann::json::parse(pj.out);
    CHECK(js["k"] == 2);
    Run all = bpv("export-pomdp " + coffee + " --property P1 --reps-range h=-2..0");
    REQUIRE(all.code == 0);
    CHECK(nlohmann::json::parse(all.out).size() == 3);
    CHECK(bpv("export-pomdp " + coffee + " --k 1 --reps-range h=0..0 --format dot").code == 0);
    CHECK(contains(bpv("export-pomdp " + coffee + " --property P1 --reps-range h=0..0 --dot").out, "digraph"));
    CHECK(bpv("export-graph " + coffee + " --json").out == gj.out);
}

TEST_CASE("reports are deterministic apart from timing") {
    auto report = [&] {
        Run r = bpv("verify " + coffee + " --property P1 --reps-range h=-2..0 --format json --threads 2");
        auto js = nlohmann::json::parse(r.out);
        js.erase("timing");
        return js.dump();
    };
    CHECK(report() == report());
    std::string args = "simulate " + coffee + " --world h=0 --psi \"F<=2 B(h=2)=1\" --trials 3000 --format json";
    auto a = nlohmann::json::parse(bpv(args).out);
    auto b = nlohmann::json::parse(bpv(args).out);
    a.erase("timing");
    b.erase("timing");
    CHECK(a == b);
}

TEST_CASE("witness policies replay through simulate") {
    std::string prefix = temp_path("w");
    Run v = bpv("verify " + coffee + " --property P1 --reps-range h=0..0 --witness-policies " + prefix);
    REQUIRE(v.code == 0);  // the h=0 type alone meets the bound
    std::string policy = prefix + ".P1.t1.max.json";
    std::ifstream in(policy);
    REQUIRE(in.good());
    Run s = bpv("simulate " + coffee + " --world h=0 --property P1 --trials 2000 --policy " + policy);
    CHECK(s.code == 0);
    std::remove(policy.c_str());
    std::remove((prefix + ".P1.t1.min.json").c_str());
}

TEST_CASE("encode-pa writes a model and checks soundness") {
    std::string pa = temp_path("pa.json");
    std::string model = temp_path("pa.bp");
    {
        std::ofstream out(pa);
        out << R"({"states":2,"alphabet":["a","b"],
                   "matrices":[[["1/2","1/2"],["0","1"]],[["0","1"],["1","0"]]],
                   "initial":0,"accepting":[1],"threshold":"1/2"})";
    }
    Run r = bpv("encode-pa " + pa + " -o " + model + " --check 5");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "63 word(s) up to length 5, all equal"));
    std::ifstream in(model);
    std::stringstream text;
    text << in.rdbuf();
    CHECK(contains(text.str(), "rho1"));
    CHECK(contains(text.str(), "rho2"));
    // The emitted model parses and loads through the CLI.
    Run g = bpv("export-graph " + model);
    CHECK(g.code == 0);
    // The letter b swaps the states, so two sources move.
    Run local = bpv("encode-pa " + pa + " --local-effect");
    CHECK(local.code == 2);
    CHECK(contains(local.out, "PA-NOT-SSPA"));
    std::remove(pa.c_str());
    std::remove(model.c_str());
}
