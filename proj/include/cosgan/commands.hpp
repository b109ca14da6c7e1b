#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cosgan/dataset.hpp"
#include "cosgan/evaluation.hpp"
#include "cosgan/synthetic.hpp"
#include "cosgan/trainer.hpp"

namespace cosgan {

// Command implementations shared by the CLI binary and the tests.  Each
// command writes a run manifest and the fully resolved configuration into its
// output directory so any run can be audited and replayed.

struct CommandResult {
    int exit_code = 0;  // 0 ok, 1 validation failure, 2 runtime failure
    std::vector<std::string> warnings;
    json summary;
};

namespace cmd_detail {

inline void write_run_manifest(const std::string& out_dir, const std::string& command,
                               const json& summary, const std::vector<std::string>& warnings) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    json j{{"command", command}, {"summary", summary}, {"warnings", warnings}};
    std::ofstream f(fs::path(out_dir) / "run_manifest.json");
    f << j.dump(2) << "\n";
}

}  // namespace cmd_detail

// ---------------------------------------------------------------------------
// prepare

inline CommandResult cmd_prepare(const std::string& in_dir, const std::string& out_dir,
                                 const PrepareConfig& cfg = {},
                                 const PreparePlugins& plugins = {}) {
    CommandResult res;
    namespace fs = std::filesystem;
    if (!fs::is_directory(in_dir)) {
        res.exit_code = 1;
        res.summary["error"] = "input directory does not exist: " + in_dir;
        return res;
    }
    PrepareConfig effective = cfg;
    if (!plugins.keypoints || !plugins.upscaler) {
        effective.run_calibration = false;
        res.warnings.push_back("calibration skipped: no keypoint/upscaler binding");
    }
    Manifest m = prepare_dataset(in_dir, out_dir, effective, plugins);
    if (m.empty()) res.warnings.push_back("no image pairs found in " + in_dir);

    std::map<std::string, int> by_status;
    for (const auto& rec : m) ++by_status[rec.status];
    res.summary = {{"records", m.size()},
                   {"by_status", by_status},
                   {"manifest", (fs::path(out_dir) / "manifest.jsonl").string()}};
    cmd_detail::write_run_manifest(out_dir, "prepare", res.summary, res.warnings);
    return res;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
    long max_steps = -1;  // stop early after this many steps (<0: full schedule)
    int eval_every = 0;   // record FID on a held-out slice every N steps (0: off)
    std::size_t eval_samples = 64;
    std::string resume_checkpoint;
};

inline CommandResult cmd_train(const RunConfig& cfg, const std::vector<ImagePair>& data,
                               const std::string& out_dir, const TrainOptions& opts = {}) {
    CommandResult res;
    namespace fs = std::filesystem;
    if (data.empty()) {
        res.exit_code = 1;
        res.summary["error"] = "no training pairs";
        return res;
    }
    fs::create_directories(out_dir);
    save_run_config(cfg, (fs::path(out_dir) / "config.json").string());

    Trainer trainer = opts.resume_checkpoint.empty()
                          ? Trainer(cfg)
                          : Trainer::from_checkpoint(load_checkpoint(opts.resume_checkpoint));

    std::ofstream log(fs::path(out_dir) / "loss_log.jsonl",
                      opts.resume_checkpoint.empty() ? std::ios::trunc : std::ios::app);
    MeanRgbExtractor fid_ex;

    const int total_epochs = cfg.train.epochs_constant + cfg.train.epochs_decay;
    long steps_done = trainer.global_step();
    for (int epoch = trainer.epoch(); epoch < total_epochs; ++epoch) {
        trainer.set_epoch(epoch);
        const int res_px = trainer.state().resolution;
        const int bs = batch_size_at(trainer.state(), cfg.train, cfg.generator);
        std::vector<std::size_t> order = epoch_order(data.size(), cfg.train.seed, epoch);
        for (std::size_t off = 0; off + bs <= order.size(); off += bs) {
            std::vector<std::size_t> idx(order.begin() + off, order.begin() + off + bs);
            PairBatch batch = assemble_batch(data, idx, cfg.train.augment, cfg.train.seed,
                                             epoch, res_px);
            StepResult sr = trainer.train_step(batch);
            if (!sr.ok) {
                res.exit_code = 2;
                res.summary["error"] = sr.error;
                cmd_detail::write_run_manifest(out_dir, "train", res.summary, res.warnings);
                return res;
            }
            ++steps_done;
            json entry{{"step", steps_done},
                       {"epoch", epoch},
                       {"resolution", res_px},
                       {"g_total", sr.record.generator_total},
                       {"dd_total", sr.record.domain_disc_total},
                       {"dr_total", sr.record.realfake_disc_total},
                       {"g_terms", sr.record.generator_terms}};
            if (opts.eval_every > 0 && steps_done % opts.eval_every == 0) {
                std::vector<Tensor> gen_imgs, tgt_imgs;
                const std::size_t n = std::min(opts.eval_samples, data.size());
                for (std::size_t i = 0; i < n; ++i) {
                    Tensor x = mat_to_tensor(resize_to(data[i].anime, res_px));
                    Tensor xb({1, x.dim(0), x.dim(1), x.dim(2)}, 0.0);
                    std::copy(x.data(), x.data() + x.numel(), xb.data());
                    gen_imgs.push_back(batch_slice(
                        generate(xb, trainer.generator(), trainer.state()), 0));
                    tgt_imgs.push_back(mat_to_tensor(resize_to(data[i].clothing, res_px)));
                }
                entry["fid"] = fid_images(tgt_imgs, gen_imgs, fid_ex);
            }
            log << entry.dump() << "\n";
            log.flush();
            if (opts.max_steps >= 0 && steps_done >= opts.max_steps) goto done;
        }
    }
done:
    const std::string ck_path = (fs::path(out_dir) / "checkpoint.bin").string();
    save_checkpoint(trainer.make_checkpoint(), ck_path);
    res.summary = {{"steps", steps_done},
                   {"epoch", trainer.epoch()},
                   {"resolution", trainer.state().resolution},
                   {"checkpoint", ck_path},
                   {"enabled_terms", enabled_generator_terms(cfg)}};
    cmd_detail::write_run_manifest(out_dir, "train", res.summary, res.warnings);
    return res;
}

// ---------------------------------------------------------------------------
// generate

inline CommandResult cmd_generate(const std::string& checkpoint_path,
                                  const std::vector<std::string>& input_paths,
                                  const std::string& out_dir) {
    CommandResult res;
    namespace fs = std::filesystem;
    Checkpoint ck;
    try {
        ck = load_checkpoint(checkpoint_path);
    } catch (const std::exception& e) {
        res.exit_code = 1;
        res.summary["error"] = e.what();
        return res;
    }
    if (input_paths.empty()) {
        res.exit_code = 1;
        res.summary["error"] = "no input images";
        return res;
    }
    GeneratorParams gen{ck.config.generator, ck.generator, ck.generator_built_stage};
    if (ck.state.resolution < ck.config.generator.max_res)
        res.warnings.push_back("checkpoint is below full resolution (" +
                               std::to_string(ck.state.resolution) + " px)");

    fs::create_directories(out_dir);
    std::vector<cv::Mat> ins, outs;
    std::vector<std::string> out_paths;
    for (const auto& path : input_paths) {
        cv::Mat in = load_image(path);
        Tensor x = mat_to_tensor(resize_to(in, ck.state.resolution));
        Tensor xb({1, x.dim(0), x.dim(1), x.dim(2)}, 0.0);
        std::copy(x.data(), x.data() + x.numel(), xb.data());
        cv::Mat out = tensor_to_mat(batch_slice(generate(xb, gen, ck.state), 0));
        const std::string out_path =
            (fs::path(out_dir) / (fs::path(path).stem().string() + "_generated.png")).string();
        save_image(out, out_path);
        ins.push_back(resize_to(in, ck.state.resolution));
        outs.push_back(out);
        out_paths.push_back(out_path);
    }
    const std::string grid = (fs::path(out_dir) / "grid.png").string();
    save_image(contact_sheet(ins, outs), grid);
    res.summary = {{"outputs", out_paths}, {"grid", grid}, {"resolution", ck.state.resolution}};
    cmd_detail::write_run_manifest(out_dir, "generate", res.summary, res.warnings);
    return res;
}

// ---------------------------------------------------------------------------
// evaluate

inline CommandResult cmd_evaluate(const std::string& checkpoint_path,
                                  const std::vector<ImagePair>& test_pairs,
                                  const std::string& out_dir) {
    CommandResult res;
    namespace fs = std::filesystem;
    if (test_pairs.size() < 2) {
        res.exit_code = 1;
        res.summary["error"] = "need at least 2 test pairs";
        return res;
    }
    Checkpoint ck = load_checkpoint(checkpoint_path);
    GeneratorParams gen{ck.config.generator, ck.generator, ck.generator_built_stage};

    std::vector<Tensor> real, fake;
    for (const auto& p : test_pairs) {
        Tensor x = mat_to_tensor(resize_to(p.anime, ck.state.resolution));
        Tensor xb({1, x.dim(0), x.dim(1), x.dim(2)}, 0.0);
        std::copy(x.data(), x.data() + x.numel(), xb.data());
        fake.push_back(batch_slice(generate(xb, gen, ck.state), 0));
        real.push_back(mat_to_tensor(resize_to(p.clothing, ck.state.resolution)));
    }
    MeanRgbExtractor fid_ex;
    PyramidLayerExtractor lpips_ex;
    EvalReport report = evaluate_sets(real, fake, fid_ex, lpips_ex);

    fs::create_directories(out_dir);
    json j{{"fid", report.fid},
           {"lpips", report.lpips_mean},
           {"n_real", report.n_real},
           {"n_fake", report.n_fake},
           {"fid_extractor", report.fid_extractor},
           {"lpips_extractor", report.lpips_extractor},
           {"ladder_row", ck.config.ladder_row},
           {"enabled_terms", enabled_generator_terms(ck.config)}};
    std::ofstream(fs::path(out_dir) / "evaluation.json") << j.dump(2) << "\n";
    res.summary = j;
    cmd_detail::write_run_manifest(out_dir, "evaluate", res.summary, res.warnings);
    return res;
}

// ---------------------------------------------------------------------------
// report

inline CommandResult cmd_report(const std::vector<std::string>& run_dirs,
                                const std::string& out_path) {
    CommandResult res;
    namespace fs = std::filesystem;
    struct Row {
        std::string name;
        bool complete = false;
        double fid = 0, lpips = 0;
        std::string terms;
    };
    std::vector<Row> rows;
    for (const auto& dir : run_dirs) {
        Row row;
        row.name = fs::path(dir).filename().string();
        const fs::path ev = fs::path(dir) / "evaluation.json";
        if (fs::exists(ev)) {
            json j;
            std::ifstream(ev) >> j;
            if (j.contains("fid") && j.contains("lpips")) {
                row.complete = true;
                row.fid = j.at("fid").get<double>();
                row.lpips = j.at("lpips").get<double>();
                if (j.contains("enabled_terms"))
                    for (const auto& t : j.at("enabled_terms"))
                        row.terms += (row.terms.empty() ? "" : "+") + t.get<std::string>();
                if (j.contains("ladder_row") && !j.at("ladder_row").get<std::string>().empty())
                    row.name += " (" + j.at("ladder_row").get<std::string>() + ")";
            }
        }
        if (!row.complete) res.warnings.push_back("missing metrics in " + dir);
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.complete != b.complete) return a.complete;
        return a.fid < b.fid;
    });
    double best_fid = 1e300, best_lpips = 1e300;
    for (const auto& r : rows)
        if (r.complete) {
            best_fid = std::min(best_fid, r.fid);
            best_lpips = std::min(best_lpips, r.lpips);
        }

    std::ostringstream md;
    md << "| run | terms | FID | LPIPS |\n|---|---|---|---|\n";
    json jrows = json::array();
    for (const auto& r : rows) {
        md << "| " << r.name << " | " << r.terms << " | ";
        if (r.complete) {
            std::ostringstream f, l;
            f << std::fixed << std::setprecision(2) << r.fid;
            l << std::fixed << std::setprecision(4) << r.lpips;
            md << (r.fid == best_fid ? "**" + f.str() + "**" : f.str()) << " | "
               << (r.lpips == best_lpips ? "**" + l.str() + "**" : l.str()) << " |\n";
            jrows.push_back({{"run", r.name}, {"fid", r.fid}, {"lpips", r.lpips}});
        } else {
            md << "incomplete | incomplete |\n";
            jrows.push_back({{"run", r.name}, {"incomplete", true}});
        }
    }
    fs::create_directories(fs::path(out_path).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(out_path).parent_path());
    std::ofstream(out_path) << md.str();
    res.summary = {{"rows", jrows}, {"table", out_path}};
    return res;
}

}  // namespace cosgan
