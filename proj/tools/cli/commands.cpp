#include "cli/commands.hpp"

#include "atl/errors.hpp"
#include "atl/gradcam.hpp"
#include "atl/memory.hpp"
#include "atl/tensor_io.hpp"

#include <cstdio>
#include <iomanip>

namespace atl::cli {

namespace fs = std::filesystem;

void apply(ExperimentConfig& c, const TrainOverrides& o) {
    if (o.strategy) c.train.strategy = *o.strategy;
    if (!o.at_layers.empty()) c.train.at.layers = o.at_layers;
    if (o.beta) c.train.at.beta = *o.beta;
    if (o.similarity) c.train.at.similarity = *o.similarity;
    if (o.aggregation) c.train.at.aggregation = *o.aggregation;
    if (!o.checkpoints.empty()) c.orth_checkpoints = o.checkpoints;
    if (o.output_dir) c.output_dir = *o.output_dir;
    if (o.seed) c.train.seed = *o.seed;
    if (c.train.at.beta < 0) {
        throw ConfigError("beta must be >= 0; use strategy at-inverse to encourage similarity instead");
    }
}

Splits load_splits(const ExperimentConfig& c) {
    if (c.data_source == "synth") {
        auto d = generate(c.synth);
        return {std::move(d.train), std::move(d.val), std::move(d.test)};
    }
    const Dataset all = load_manifest(c.data_source, c.stft, c.audio_duration);
    return apply_split(all, split(all, c.split_policy, c.split_seed, c.split_group));
}

Network load_orth(const fs::path& path) { return load_checkpoint(path).network; }

namespace {

fs::path prepare_output(const ExperimentConfig& c) {
    const fs::path dir = c.output_dir;
    fs::create_directories(dir);
    write_file_atomic(dir / "config.txt", format_config(c));
    return dir;
}

EpochCallback progress(std::ostream& log) {
    return [&log](const EpochMetrics& m) {
        char line[160];
        std::snprintf(line, sizeof line, "epoch %3d  train ce %.4f at %.4f acc %.3f | val ce %.4f at %.4f acc %.3f  %.1fs",
                      m.epoch, m.train_ce, m.train_at, m.train_acc, m.val_ce, m.val_at, m.val_acc, m.seconds);
        log << line << '\n' << std::flush;
    };
}

void write_run(const fs::path& dir, const ExperimentConfig& c, const TrainResult& r) {
    write_metrics_csv(dir / "metrics.csv", r.metrics);
    nlohmann::json echo = to_json(c.train);
    echo["data_source"] = c.data_source;
    echo["orth_checkpoints"] = c.orth_checkpoints;
    write_file_atomic(dir / "summary.json", summary_json(r, echo).dump(2) + "\n");
    save_checkpoint(r.model, r.provenance, dir / "model.atck");
    if (r.intermediate) {
        Provenance p = r.provenance;
        p.strategy = "dual-at-intermediate";
        save_checkpoint(*r.intermediate, p, dir / "intermediate.atck");
        write_metrics_csv(dir / "intermediate_metrics.csv", r.intermediate_metrics);
    }
}

std::vector<const Network*> pointers(const std::vector<Network>& nets) {
    std::vector<const Network*> out;
    for (const auto& n : nets) out.push_back(&n);
    return out;
}

std::vector<Network> load_orth_all(const ExperimentConfig& c) {
    std::vector<Network> out;
    for (const auto& p : c.orth_checkpoints) out.push_back(load_orth(p));
    return out;
}

}  // namespace

void run_pretrain(const ExperimentConfig& config, std::ostream& log) {
    config.train.validate(0);
    const Splits data = load_splits(config);
    const fs::path dir = prepare_output(config);
    log << "pretraining '" << config.train.task << "' on " << to_string(config.train.label) << " labels ("
        << data.train.size() << " train samples)\n";
    const auto r = pretrain(config.train, data, progress(log));
    write_run(dir, config, r);
    log << "best epoch " << r.best_epoch << ", test accuracy " << r.test_accuracy << "\nwrote " << (dir / "model.atck").string()
        << '\n';
}

void run_train(const ExperimentConfig& config, std::ostream& log) {
    config.train.validate(config.orth_checkpoints.size());
    const auto orth = load_orth_all(config);
    const Splits data = load_splits(config);
    const fs::path dir = prepare_output(config);
    log << "training strategy " << to_string(config.train.strategy) << " (" << data.train.size()
        << " train samples)\n";
    const auto r = train(config.train, data, pointers(orth), progress(log));
    write_run(dir, config, r);
    log << "best epoch " << r.best_epoch << ", test accuracy " << r.test_accuracy << "\nwrote " << dir.string() << '\n';
}

std::vector<double> default_beta_grid() { return {0.01, 0.1, 0.5, 1, 2, 5, 10, 20}; }

void run_sweep(const ExperimentConfig& config, const std::vector<int>& layers, const std::vector<double>& betas,
               int jobs, std::ostream& log) {
    if (!layers.empty() && !betas.empty()) throw ConfigError("sweep takes either layers or betas, not both");
    if (layers.empty() && betas.empty()) throw ConfigError("sweep grid is empty");
    for (double b : betas) {
        if (b < 0) throw ConfigError("beta grid values must be >= 0");
    }
    TrainConfig base = config.train;
    if (base.at.layers.empty() && !layers.empty()) base.at.layers = {layers.front()};
    base.validate(config.orth_checkpoints.size());
    const auto orth = load_orth_all(config);
    const Splits data = load_splits(config);
    const fs::path dir = prepare_output(config);
    const auto result = layers.empty()
                            ? sweep_betas(base, betas, data, pointers(orth), config.selection, jobs)
                            : sweep_layers(base, layers, data, pointers(orth), config.selection, jobs);
    write_sweep_csv(dir / "sweep.csv", result);
    log << (layers.empty() ? "beta" : "layer") << " sweep, " << result.rows.size() << " runs\n";
    log << " layer      beta  val_acc  test_acc\n";
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const auto& r = result.rows[i];
        char line[120];
        std::snprintf(line, sizeof line, "%6d %9.4g %8.4f %9.4f%s", r.layer, r.beta, r.val_accuracy, r.test_accuracy,
                      i == result.best ? "  <- best" : "");
        log << line << '\n';
    }
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : result.rows) {
        rows.push_back({{"layer", r.layer},
                        {"beta", r.beta},
                        {"train_accuracy", r.train_accuracy},
                        {"val_accuracy", r.val_accuracy},
                        {"test_accuracy", r.test_accuracy},
                        {"best_val_loss", r.best_val_loss},
                        {"best_epoch", r.best_epoch}});
    }
    const nlohmann::json summary{{"config", to_json(base)},
                                 {"selection", std::string(to_string(result.selection))},
                                 {"rows", rows},
                                 {"best", result.best}};
    write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
}

namespace {

Tensor load_input(const std::string& ref) {
    const auto hash = ref.find(".atck#");
    if (hash != std::string::npos) {
        const Container c = read_container(ref.substr(0, hash + 5));
        return c.tensor(ref.substr(hash + 6));
    }
    const auto specs = preprocess(read_wav(ref));
    if (specs.empty()) throw FormatError(ref + ": no audio");
    return specs.front().to_tensor();
}

}  // namespace

void run_gradcam(const GradcamRequest& req, std::ostream& log) {
    const auto ck = load_checkpoint(req.checkpoint);
    const Tensor raw = load_input(req.input);
    Tensor x = raw;
    normalize(x, {ck.provenance.norm_mean, ck.provenance.norm_std});
    const auto hm = gradcam(ck.network, x, req.class_index, req.layer,
                            req.nearest ? Upsample::nearest : Upsample::bilinear);
    if (!req.out_stem.parent_path().empty()) fs::create_directories(req.out_stem.parent_path());
    const auto paths = render(hm, raw, req.out_stem);
    log << "class " << hm.class_index << ", layer " << hm.layer << ", " << hm.rows << "x" << hm.cols << " heatmap (peak "
        << hm.max() << ")\n";
    log << "wrote " << paths.spectrogram.string() << ", " << paths.heatmap.string() << ", " << paths.overlay.string()
        << '\n';
    if (req.csv) {
        const fs::path csv = req.out_stem.string() + "_heatmap.csv";
        write_heatmap_csv(hm, csv);
        log << "wrote " << csv.string() << '\n';
    }
}

namespace {

std::string human(std::uint64_t bytes) {
    char buf[64];
    const double mib = static_cast<double>(bytes) / (1024.0 * 1024.0);
    std::snprintf(buf, sizeof buf, "%llu bytes (%.2f MiB)", static_cast<unsigned long long>(bytes), mib);
    return buf;
}

}  // namespace

void run_estimate_memory(const MemoryRequest& req, std::ostream& out) {
    if (req.at_layers.empty()) throw ConfigError("estimate-memory needs at least one --at-layer");
    if (req.batch == 0) throw ConfigError("batch must be >= 1");
    PresetOptions po;
    po.input_shape = req.input_shape;
    const ArchConfig arch = make_preset(req.arch, po);
    const auto m = estimate_memory(arch, req.input_shape, req.batch, req.at_layers, req.bytes_per_number);
    out << "architecture " << req.arch << ", input " << to_string(req.input_shape) << ", batch " << req.batch << '\n';
    out << "  extractor weights       " << human(m.extractor_bytes) << '\n';
    for (const auto& l : m.layers) {
        out << "  layer " << std::setw(2) << l.layer << "  #G " << l.gram_elements << "  #F " << l.feature_elements
            << "  -> " << human(m.layer_bytes(l)) << '\n';
    }
    out << "  total                   " << human(m.total_bytes) << '\n';
    if (req.json_path) {
        write_file_atomic(*req.json_path, to_json(m).dump(2) + "\n");
    } else {
        out << to_json(m).dump() << '\n';
    }
}

void run_synth(const ExperimentConfig& config, std::ostream& log) {
    const auto data = generate(config.synth);
    const fs::path dir = prepare_output(config);
    for (const auto& [name, split] : {std::pair{"train", &data.train}, {"val", &data.val}, {"test", &data.test}}) {
        const auto manifest = save_dataset(*split, dir, name);
        log << "wrote " << manifest.string() << " (" << split->size() << " samples, Cramer's V "
            << cramers_v(split->target, split->orth1) << ")\n";
    }
}

}  // namespace atl::cli
