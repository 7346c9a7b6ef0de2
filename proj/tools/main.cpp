#include "cli/commands.hpp"
#include "cli/oracle_suite.hpp"

#include "atl/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace atl;
using namespace atl::cli;

namespace {

Shape parse_shape(const std::string& text) {
    Shape s;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto x = std::min(text.find('x', start), text.size());
        try {
            s.push_back(std::stoll(text.substr(start, x - start)));
        } catch (const std::logic_error&) {
            throw ConfigError("bad input shape '" + text + "', expected CxHxW");
        }
        start = x + 1;
    }
    if (s.size() != 3) throw ConfigError("bad input shape '" + text + "', expected CxHxW");
    return s;
}

struct TrainFlags {
    std::string config;
    std::string strategy, similarity, aggregation, output;
    std::vector<int> layers;
    std::vector<std::string> checkpoints;
    std::optional<double> beta;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* app, bool at_flags) {
        app->add_option("--config", config, "Experiment config file (key = value lines)")->check(CLI::ExistingFile);
        app->add_option("--output", output, "Run directory (overrides output.dir)");
        app->add_option("--seed", seed, "Training seed (overrides train.seed)");
        if (!at_flags) return;
        app->add_option("--strategy", strategy, "scratch, wi, wi-freeze, at, at-inverse, dual-at");
        app->add_option("--at-layer", layers, "AT conv layer (repeatable)");
        app->add_option("--beta", beta, "AT weight");
        app->add_option("--similarity", similarity, "squared_cosine or sigmoid_mse");
        app->add_option("--aggregation", aggregation, "gram, mean, sum, max, comp_mul");
        app->add_option("--checkpoint", checkpoints, "Orthogonal checkpoint (repeatable, ordered)");
    }

    ExperimentConfig resolve() const {
        ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_config(config);
        TrainOverrides o;
        if (!strategy.empty()) o.strategy = strategy_from_string(strategy);
        o.at_layers = layers;
        o.beta = beta;
        if (!similarity.empty()) o.similarity = similarity_from_string(similarity);
        if (!aggregation.empty()) o.aggregation = aggregation_from_string(aggregation);
        o.checkpoints = checkpoints;
        if (!output.empty()) o.output_dir = output;
        o.seed = seed;
        apply(c, o);
        return c;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Anti-transfer learning toolkit"};
    app.require_subcommand(1);

    TrainFlags pre_flags, train_flags, sweep_flags, synth_flags, print_flags;
    auto* pre = app.add_subcommand("pretrain", "Train an orthogonal-task model");
    pre_flags.attach(pre, false);

    auto* tr = app.add_subcommand("train", "Train with a transfer strategy");
    train_flags.attach(tr, true);

    auto* sw = app.add_subcommand("sweep", "Layer or beta sweep");
    sweep_flags.attach(sw, true);
    std::string sweep_layers;
    std::optional<std::string> sweep_betas;
    int jobs = 1;
    sw->add_option("--layers", sweep_layers, "Layer list, e.g. 1..4 or 1,3,5");
    sw->add_option("--betas", sweep_betas, "Beta list; without a value the default grid")->expected(0, 1);
    sw->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);

    auto* gc = app.add_subcommand("gradcam", "Grad-CAM heatmap for one input");
    GradcamRequest cam;
    std::string cam_out = "gradcam";
    gc->add_option("--checkpoint", cam.checkpoint, "Trained model")->required()->check(CLI::ExistingFile);
    gc->add_option("--input", cam.input, "WAV file or <container>.atck#<tensor>")->required();
    gc->add_option("--layer", cam.layer, "Conv layer (1-based)")->required();
    gc->add_option("--class", cam.class_index, "Class index")->required();
    gc->add_option("--out", cam_out, "Output path stem");
    gc->add_flag("--nearest", cam.nearest, "Nearest-neighbour instead of bilinear upsampling");
    gc->add_flag("--csv", cam.csv, "Also dump raw heatmap values as CSV");

    auto* ck = app.add_subcommand("gradcheck", "Run the built-in gradient oracle suite");
    OracleOptions oracle;
    ck->add_option("--seed", oracle.seed, "Seed for the random probes");
    ck->add_flag("--inject-at-sign-flip", oracle.flip_at_gradient)->group("");

    auto* mem = app.add_subcommand("estimate-memory", "Extra memory needed by anti-transfer");
    MemoryRequest mreq;
    std::string mem_input = "1x126x129";
    std::string mem_json;
    mem->add_option("--arch", mreq.arch, "Architecture preset");
    mem->add_option("--batch", mreq.batch, "Batch size");
    mem->add_option("--at-layer", mreq.at_layers, "AT conv layer (repeatable)")->required();
    mem->add_option("--input", mem_input, "Input extents CxHxW");
    mem->add_option("--bytes", mreq.bytes_per_number, "Bytes per number");
    mem->add_option("--json", mem_json, "Write the JSON estimate to this file");

    auto* syn = app.add_subcommand("synth", "Write a synthetic dataset (containers + manifests)");
    synth_flags.attach(syn, false);

    auto* pc = app.add_subcommand("print-config", "Print the fully resolved config");
    print_flags.attach(pc, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Exit::ok : Exit::config_error;
    }

    try {
        if (*pre) {
            run_pretrain(pre_flags.resolve(), std::cout);
        } else if (*tr) {
            run_train(train_flags.resolve(), std::cout);
        } else if (*sw) {
            std::vector<int> layers = sweep_layers.empty() ? std::vector<int>{} : parse_int_list(sweep_layers);
            std::vector<double> betas;
            if (sweep_betas) betas = sweep_betas->empty() ? default_beta_grid() : parse_double_list(*sweep_betas);
            else if (sw->count("--betas")) betas = default_beta_grid();
            run_sweep(sweep_flags.resolve(), layers, betas, jobs, std::cout);
        } else if (*gc) {
            cam.out_stem = cam_out;
            run_gradcam(cam, std::cout);
        } else if (*ck) {
            return print_report(run_oracle_suite(oracle), std::cout) ? Exit::ok : Exit::check_failed;
        } else if (*mem) {
            mreq.input_shape = parse_shape(mem_input);
            if (!mem_json.empty()) mreq.json_path = mem_json;
            run_estimate_memory(mreq, std::cout);
        } else if (*syn) {
            run_synth(synth_flags.resolve(), std::cout);
        } else if (*pc) {
            std::cout << format_config(print_flags.resolve());
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return Exit::config_error;
    } catch (const CompatibilityError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return Exit::config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Exit::runtime_failure;
    }
    return Exit::ok;
}
