#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "cosgan/commands.hpp"

using namespace cosgan;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
    fs::path path;
    explicit TmpDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("cosgan_cli_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& s) const { return (path / s).string(); }
};

RunConfig micro_config() {
    RunConfig c;
    c.generator.min_res = 16;
    c.generator.max_res = 16;
    c.generator.base_ch = 4;
    c.generator.ch_cap = 8;
    c.discriminator.base_ch = 2;
    c.train.batch_size = 2;
    c.train.batch_size_full_res = 2;  // single-stage config: always "full res"
    c.train.epochs_constant = 1;
    c.train.epochs_decay = 1;
    c.train.seed = 5;
    c.progressive = false;
    return c;
}

std::vector<ImagePair> micro_data(int n) { return synthetic_corpus(n, 77, 16); }

std::string train_micro(const TmpDir& tmp, const std::string& name, long steps) {
    TrainOptions opts;
    opts.max_steps = steps;
    CommandResult r = cmd_train(micro_config(), micro_data(4), tmp.sub(name), opts);
    REQUIRE(r.exit_code == 0);
    return r.summary.at("checkpoint").get<std::string>();
}

}  // namespace

TEST_CASE("prepare: empty input directory succeeds with a warning") {
    TmpDir tmp("prep_empty");
    fs::create_directories(tmp.sub("empty"));
    CommandResult r = cmd_prepare(tmp.sub("empty"), tmp.sub("out"));
    CHECK(r.exit_code == 0);
    REQUIRE_FALSE(r.warnings.empty());
    CHECK(r.summary.at("records").get<int>() == 0);
    CHECK(fs::exists(tmp.sub("out") + "/run_manifest.json"));
    // missing input dir is a validation failure
    CHECK(cmd_prepare(tmp.sub("nonexistent"), tmp.sub("out2")).exit_code == 1);
}

TEST_CASE("prepare: the synthetic fixture yields ten calibrated records") {
    TmpDir tmp("prep_fix");
    write_prepare_fixture(tmp.sub("raw"));
    CommandResult r = cmd_prepare(tmp.sub("raw"), tmp.sub("out"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.summary.at("records").get<int>() == 12);
    CHECK(r.summary.at("by_status").at("calibrated").get<int>() == 10);
    // rerun reprocesses nothing and reports the same totals
    CommandResult again = cmd_prepare(tmp.sub("raw"), tmp.sub("out"));
    CHECK(again.summary == r.summary);
}

TEST_CASE("train writes config, loss log and checkpoint") {
    TmpDir tmp("train");
    const std::string ck = train_micro(tmp, "run", 4);
    CHECK(fs::exists(ck));
    CHECK(fs::exists(tmp.sub("run") + "/config.json"));
    std::ifstream log(tmp.sub("run") + "/loss_log.jsonl");
    int lines = 0;
    std::string line;
    json last;
    while (std::getline(log, line)) {
        last = json::parse(line);
        ++lines;
    }
    CHECK(lines == 4);
    CHECK(last.at("step").get<int>() == 4);
    CHECK(last.at("g_terms").contains("l1"));
    // no data -> validation failure
    CHECK(cmd_train(micro_config(), {}, tmp.sub("run2")).exit_code == 1);
}

TEST_CASE("config echo round-trips to an identical run") {
    TmpDir tmp("echo");
    train_micro(tmp, "a", 3);
    RunConfig echoed = load_run_config(tmp.sub("a") + "/config.json");
    CHECK(json(echoed) == json(micro_config()));
    TrainOptions opts;
    opts.max_steps = 3;
    CommandResult r2 = cmd_train(echoed, micro_data(4), tmp.sub("b"), opts);
    REQUIRE(r2.exit_code == 0);
    // identical loss trajectories step by step
    std::ifstream la(tmp.sub("a") + "/loss_log.jsonl"), lb(tmp.sub("b") + "/loss_log.jsonl");
    std::string sa, sb;
    while (std::getline(la, sa)) {
        REQUIRE(std::getline(lb, sb));
        CHECK(sa == sb);
    }
}

TEST_CASE("generate: five inputs give five outputs and one grid") {
    TmpDir tmp("gen");
    const std::string ck = train_micro(tmp, "run", 2);
    std::vector<std::string> inputs;
    for (int i = 0; i < 5; ++i) {
        ImagePair p = synthetic_pair(i, 9, 16);
        const std::string path = tmp.sub("in" + std::to_string(i) + ".png");
        save_image(p.anime, path);
        inputs.push_back(path);
    }
    CommandResult r = cmd_generate(ck, inputs, tmp.sub("out"));
    REQUIRE(r.exit_code == 0);
    const auto outs = r.summary.at("outputs").get<std::vector<std::string>>();
    REQUIRE(outs.size() == 5);
    for (const auto& o : outs) CHECK(fs::exists(o));
    // grid: two rows (input / output), five columns
    cv::Mat grid = load_image(r.summary.at("grid").get<std::string>());
    CHECK(grid.rows == 2 * 16);
    CHECK(grid.cols == 5 * 16);

    // deterministic across reruns
    CommandResult r2 = cmd_generate(ck, inputs, tmp.sub("out2"));
    cv::Mat a = load_image(outs[0]);
    cv::Mat b = load_image(r2.summary.at("outputs").get<std::vector<std::string>>()[0]);
    CHECK(std::equal(a.datastart, a.dataend, b.datastart));
}

TEST_CASE("generate rejects corrupt checkpoints and empty input lists") {
    TmpDir tmp("gen_bad");
    std::ofstream(tmp.sub("bad.bin")) << "garbage";
    CommandResult r = cmd_generate(tmp.sub("bad.bin"), {tmp.sub("x.png")}, tmp.sub("out"));
    CHECK(r.exit_code == 1);
    const std::string ck = train_micro(tmp, "run", 1);
    CHECK(cmd_generate(ck, {}, tmp.sub("out")).exit_code == 1);
}

TEST_CASE("evaluate writes a metrics report") {
    TmpDir tmp("eval");
    const std::string ck = train_micro(tmp, "run", 2);
    CommandResult r = cmd_evaluate(ck, micro_data(6), tmp.sub("ev"));
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(tmp.sub("ev") + "/evaluation.json"));
    CHECK(r.summary.at("fid").get<double>() >= 0.0);
    CHECK(r.summary.at("lpips").get<double>() >= 0.0);
    CHECK(cmd_evaluate(ck, {}, tmp.sub("ev2")).exit_code == 1);
}

TEST_CASE("report renders a sorted table with lowest values highlighted") {
    TmpDir tmp("report");
    auto fake_eval = [&](const std::string& name, double fid, double lp) {
        fs::create_directories(tmp.sub(name));
        json j{{"fid", fid}, {"lpips", lp}, {"enabled_terms", json::array({"l1"})},
               {"ladder_row", ""}};
        std::ofstream(tmp.sub(name) + "/evaluation.json") << j.dump();
        return tmp.sub(name);
    };
    const std::string run_hi = fake_eval("hi", 55.4, 0.61);
    const std::string run_lo = fake_eval("lo", 30.4, 0.58);
    fs::create_directories(tmp.sub("broken"));
    CommandResult r =
        cmd_report({run_hi, run_lo, tmp.sub("broken")}, tmp.sub("table.md"));
    CHECK(r.exit_code == 0);
    REQUIRE(r.warnings.size() == 1);  // the broken run is marked, not fatal

    std::ifstream f(tmp.sub("table.md"));
    std::string content((std::istreambuf_iterator<char>(f)), {});
    // sorted by FID: "lo" row first, best values bold
    CHECK(content.find("| lo |") < content.find("| hi |"));
    CHECK(content.find("**30.40**") != std::string::npos);
    CHECK(content.find("**0.5800**") != std::string::npos);
    CHECK(content.find("incomplete") != std::string::npos);

    // a perfect self-comparison row renders as 0.00 / 0.0000
    const std::string self = fake_eval("self", 0.0, 0.0);
    cmd_report({self}, tmp.sub("self.md"));
    std::ifstream fs2(tmp.sub("self.md"));
    std::string c2((std::istreambuf_iterator<char>(fs2)), {});
    CHECK(c2.find("**0.00**") != std::string::npos);
    CHECK(c2.find("**0.0000**") != std::string::npos);
}

TEST_CASE("ladder rows reproduce the cumulative configuration structure") {
    // (a) is the plain conditional baseline; each later row adds exactly one
    // technique and never removes one
    auto enabled = [](char row) {
        std::set<std::string> out;
        RunConfig c = ladder_config(row);
        for (const auto& t : enabled_generator_terms(c)) out.insert(t);
        if (c.progressive) out.insert("progressive");
        if (c.calibrate_dataset) out.insert("calibration");
        if (c.losses.flags.unassociated) out.insert("unassociated");
        if (c.discriminator.spectral) out.insert("spectral");
        if (c.discriminator.multiscale_domain) out.insert("multiscale_domain");
        if (c.discriminator.multiscale_realfake) out.insert("multiscale_realfake");
        return out;
    };
    auto a = enabled('a');
    CHECK(a == std::set<std::string>({"adv_domain", "l1"}));
    std::set<std::string> prev = a;
    for (char row = 'b'; row <= 'j'; ++row) {
        auto cur = enabled(row);
        INFO("row " << row);
        CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
        CHECK(cur.size() >= prev.size() + 1);
        prev = cur;
    }
    CHECK(prev.count("input_consistency") == 1);  // the full method, row (j)
    CHECK_THROWS_AS(ladder_config('k'), std::invalid_argument);
}

TEST_CASE("dotted overrides survive the json round-trip") {
    RunConfig base = micro_config();
    json j = base;
    apply_override(j, "train.lr=0.001");
    apply_override(j, "losses.term_flags.l1=false");
    apply_override(j, "ladder_row=j");
    RunConfig c = j.get<RunConfig>();
    CHECK(c.train.lr == 0.001);
    CHECK_FALSE(c.losses.flags.l1);
    CHECK(c.ladder_row == "j");
    CHECK_THROWS_AS(apply_override(j, "no_equals_sign"), std::invalid_argument);
}

TEST_CASE("the installed binary wires the subcommands") {
    // smoke-test the actual executable when the build tree layout is present
    const fs::path bin = fs::path("..") / "tools" / "cosgan";
    if (!fs::exists(bin)) {
        SUCCEED("binary not present in this layout");
        return;
    }
    TmpDir tmp("binary");
    fs::create_directories(tmp.sub("empty"));
    const std::string cmd = bin.string() + " prepare --input " + tmp.sub("empty") +
                            " --out " + tmp.sub("out") + " >/dev/null 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(std::system((bin.string() + " --help >/dev/null 2>&1").c_str()) == 0);
    // unknown flag -> CLI parse error, non-zero exit
    CHECK(std::system((bin.string() + " frobnicate >/dev/null 2>&1").c_str()) != 0);
}
