#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "cosgan/commands.hpp"

namespace {

// All paths are resolved against an explicit workspace root; by default the
// COSGAN_DATA_ROOT environment variable, falling back to the current directory.
std::string data_root(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("COSGAN_DATA_ROOT")) return env;
    return ".";
}

std::string resolve(const std::string& root, const std::string& path) {
    if (path.empty() || std::filesystem::path(path).is_absolute()) return path;
    return (std::filesystem::path(root) / path).string();
}

int finish(const cosgan::CommandResult& res) {
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << res.summary.dump(2) << "\n";
    return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"anime-character to cosplay-clothing translation toolkit"};
    app.require_subcommand(1);

    std::string root_flag, config_path, out_dir, checkpoint, stage;
    std::vector<std::string> overrides, inputs, run_dirs;
    std::uint64_t seed = 0;
    bool seed_set = false;
    long max_steps = -1;
    int eval_every = 0;

    app.add_option("--root", root_flag, "workspace root (default: $COSGAN_DATA_ROOT or .)");

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration JSON");
        cmd->add_option("--seed", seed, "root random seed")->each([&](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--override", overrides, "dotted config override key=value");
        cmd->add_option("--out", out_dir, "output directory")->required();
    };

    CLI::App* prepare = app.add_subcommand("prepare", "run the dataset preparation pipeline");
    std::string in_dir;
    prepare->add_option("--input", in_dir, "directory of raw image pairs")->required();
    add_common(prepare);

    CLI::App* train = app.add_subcommand("train", "train a model on a prepared dataset");
    std::string manifest_path, split = "train";
    train->add_option("--manifest", manifest_path, "prepared dataset manifest (JSONL)")
        ->required();
    train->add_option("--split", split, "manifest split to train on");
    train->add_option("--max-steps", max_steps, "stop after N optimization steps");
    train->add_option("--eval-every", eval_every, "record FID every N steps");
    train->add_option("--resume", checkpoint, "resume from a checkpoint");
    train->add_option("--stage", stage, "ladder row a..j to derive term flags from");
    add_common(train);

    CLI::App* generate = app.add_subcommand("generate", "translate input images");
    generate->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    generate->add_option("--inputs", inputs, "input image paths")->required();
    generate->add_option("--out", out_dir, "output directory")->required();

    CLI::App* evaluate = app.add_subcommand("evaluate", "compute FID/LPIPS for a checkpoint");
    std::string eval_manifest, eval_split = "test";
    evaluate->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    evaluate->add_option("--manifest", eval_manifest, "prepared dataset manifest")->required();
    evaluate->add_option("--split", eval_split, "manifest split to evaluate on");
    evaluate->add_option("--out", out_dir, "output directory")->required();

    CLI::App* report = app.add_subcommand("report", "render a comparison table across runs");
    report->add_option("--runs", run_dirs, "run directories with evaluation.json")->required();
    report->add_option("--out", out_dir, "output path for the markdown table")->required();

    CLI11_PARSE(app, argc, argv);
    const std::string root = data_root(root_flag);

    try {
        cosgan::RunConfig cfg;
        if (!config_path.empty()) cfg = cosgan::load_run_config(resolve(root, config_path));
        if (!stage.empty()) {
            if (stage.size() != 1) throw std::invalid_argument("--stage expects a..j");
            cfg = cosgan::ladder_config(stage[0], cfg);
        }
        if (!overrides.empty()) {
            cosgan::json j = cfg;
            for (const auto& kv : overrides) cosgan::apply_override(j, kv);
            cfg = j.get<cosgan::RunConfig>();
        }
        if (seed_set) cfg.train.seed = seed;

        if (prepare->parsed()) {
            return finish(cosgan::cmd_prepare(resolve(root, in_dir), resolve(root, out_dir)));
        }
        if (train->parsed()) {
            cosgan::Manifest m = cosgan::load_manifest(resolve(root, manifest_path));
            std::vector<cosgan::ImagePair> data = cosgan::load_split(m, split);
            cosgan::TrainOptions opts;
            opts.max_steps = max_steps;
            opts.eval_every = eval_every;
            opts.resume_checkpoint = resolve(root, checkpoint);
            return finish(cosgan::cmd_train(cfg, data, resolve(root, out_dir), opts));
        }
        if (generate->parsed()) {
            std::vector<std::string> paths;
            for (const auto& p : inputs) paths.push_back(resolve(root, p));
            return finish(cosgan::cmd_generate(resolve(root, checkpoint), paths,
                                               resolve(root, out_dir)));
        }
        if (evaluate->parsed()) {
            cosgan::Manifest m = cosgan::load_manifest(resolve(root, eval_manifest));
            std::vector<cosgan::ImagePair> data = cosgan::load_split(m, eval_split);
            return finish(cosgan::cmd_evaluate(resolve(root, checkpoint), data,
                                               resolve(root, out_dir)));
        }
        if (report->parsed()) {
            std::vector<std::string> dirs;
            for (const auto& d : run_dirs) dirs.push_back(resolve(root, d));
            return finish(cosgan::cmd_report(dirs, resolve(root, out_dir)));
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
