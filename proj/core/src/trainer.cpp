#include "atl/trainer.hpp"

#include "atl/errors.hpp"
#include "atl/tensor_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace atl {

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::scratch: return "scratch";
        case Strategy::wi: return "wi";
        case Strategy::wi_freeze: return "wi-freeze";
        case Strategy::at: return "at";
        case Strategy::at_inverse: return "at-inverse";
        case Strategy::dual_at: return "dual-at";
    }
    return "scratch";
}

std::string_view to_string(SplitPolicy p) {
    return p == SplitPolicy::random ? "random" : "class_wise";
}

std::string_view to_string(Selection s) {
    return s == Selection::val_accuracy ? "val_accuracy" : "val_loss";
}

Strategy strategy_from_string(std::string_view name) {
    std::string n(name);
    std::replace(n.begin(), n.end(), '_', '-');
    for (auto s : {Strategy::scratch, Strategy::wi, Strategy::wi_freeze, Strategy::at, Strategy::at_inverse,
                   Strategy::dual_at}) {
        if (to_string(s) == n) return s;
    }
    throw ConfigError("unknown strategy '" + std::string(name) +
                      "' (scratch, wi, wi-freeze, at, at-inverse, dual-at)");
}

SplitPolicy split_policy_from_string(std::string_view name) {
    if (name == "random") return SplitPolicy::random;
    if (name == "class_wise" || name == "class-wise") return SplitPolicy::class_wise;
    throw ConfigError("unknown split policy '" + std::string(name) + "' (random, class_wise)");
}

Selection selection_from_string(std::string_view name) {
    if (name == "val_accuracy") return Selection::val_accuracy;
    if (name == "val_loss") return Selection::val_loss;
    throw ConfigError("unknown selection '" + std::string(name) + "' (val_accuracy, val_loss)");
}

int required_checkpoints(Strategy s) {
    switch (s) {
        case Strategy::scratch: return 0;
        case Strategy::dual_at: return 2;
        default: return 1;
    }
}

void TrainConfig::validate(std::size_t orth_checkpoints) const {
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(adam.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0,1)");
    const bool uses_at = strategy == Strategy::at || strategy == Strategy::at_inverse || strategy == Strategy::dual_at;
    at.validate(uses_at || strategy == Strategy::wi_freeze);
    const auto need = static_cast<std::size_t>(required_checkpoints(strategy));
    if (orth_checkpoints != need) {
        throw ConfigError("strategy " + std::string(to_string(strategy)) + " needs exactly " + std::to_string(need) +
                          " orthogonal checkpoint(s), got " + std::to_string(orth_checkpoints));
    }
}

ATConfig TrainConfig::effective_at() const {
    ATConfig a = at;
    switch (strategy) {
        case Strategy::at:
        case Strategy::dual_at: a.direction = Direction::penalize; break;
        case Strategy::at_inverse: a.direction = Direction::encourage; break;
        default: a.layers.clear(); break;
    }
    return a;
}

std::uint64_t conv_weights_hash(const Network& network) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& p : network.parameters()) {
        if (p.name.rfind("conv", 0) == 0) h = hash_bits(p.value, h);
    }
    return h;
}

Evaluation evaluate(const Network& network, const Dataset& data, LabelKey label, int batch_size) {
    const int n_classes = network.arch().num_classes;
    Evaluation ev;
    ev.confusion.assign(static_cast<std::size_t>(n_classes), std::vector<std::int64_t>(static_cast<std::size_t>(n_classes), 0));
    if (data.size() == 0) return ev;
    const auto& labels = data.labels(label);
    std::int64_t correct = 0;
    double ce_sum = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
        idx.clear();
        for (std::size_t i = start; i < std::min(data.size(), start + static_cast<std::size_t>(batch_size)); ++i) {
            idx.push_back(i);
        }
        const auto out = network.forward(data.batch(idx)).output;
        const auto batch_labels = data.batch_labels(label, idx);
        const auto ce = softmax_cross_entropy(out, batch_labels);
        ce_sum += ce.loss * static_cast<double>(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const double* row = out.data() + r * static_cast<std::size_t>(n_classes);
            const auto pred = static_cast<int>(std::max_element(row, row + n_classes) - row);
            const int truth = labels[idx[r]];
            ++ev.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
            if (pred == truth) ++correct;
        }
    }
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    ev.cross_entropy = ce_sum / static_cast<double>(data.size());
    return ev;
}

namespace {

/// Pre-trained side of the AT term, aggregated once per sample and layer.
class ExtractorCache {
public:
    ExtractorCache(const Network& extractor, const Dataset& data, const ATConfig& at) : layers_(at.layers) {
        if (layers_.empty()) return;
        std::vector<std::size_t> idx;
        constexpr std::size_t chunk = 64;
        std::map<int, std::vector<Tensor>> parts;
        for (std::size_t start = 0; start < data.size(); start += chunk) {
            idx.clear();
            for (std::size_t i = start; i < std::min(data.size(), start + chunk); ++i) idx.push_back(i);
            const auto taps = extract_features(extractor, data.batch(idx), layers_);
            for (int l : layers_) parts[l].push_back(aggregate_any(taps.at(l), at.aggregation));
        }
        for (int l : layers_) {
            const auto& p = parts[l];
            Shape s = p.front().shape();
            s[0] = static_cast<std::int64_t>(data.size());
            Tensor all(s);
            std::size_t offset = 0;
            for (const auto& t : p) {
                std::copy_n(t.data(), t.size(), all.data() + offset);
                offset += t.size();
            }
            cache_[l] = std::move(all);
        }
    }

    Tensor batch(int layer, std::span<const std::size_t> idx) const {
        const Tensor& all = cache_.at(layer);
        Shape s = all.shape();
        const auto stride = all.size() / static_cast<std::size_t>(s[0]);
        s[0] = static_cast<std::int64_t>(idx.size());
        Tensor out(s);
        for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(all.data() + idx[i] * stride, stride, out.data() + i * stride);
        return out;
    }

private:
    std::vector<int> layers_;
    std::map<int, Tensor> cache_;
};

struct PassTotals {
    double ce = 0.0;
    double at = 0.0;
    std::vector<double> at_layers;
    std::int64_t correct = 0;
    std::size_t count = 0;
};

/// Eval-mode CE and AT terms over a whole split.
PassTotals evaluate_objective(const Network& net, const Dataset& data, LabelKey label, const ATConfig& at,
                              const ExtractorCache* cache) {
    PassTotals t;
    t.at_layers.assign(at.layers.size(), 0.0);
    std::vector<std::size_t> idx;
    constexpr std::size_t chunk = 64;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        idx.clear();
        for (std::size_t i = start; i < std::min(data.size(), start + chunk); ++i) idx.push_back(i);
        ForwardOptions fo;
        fo.taps = at.layers;
        const auto fwd = net.forward(data.batch(idx), fo);
        const auto ce = softmax_cross_entropy(fwd.output, data.batch_labels(label, idx));
        const double w = static_cast<double>(idx.size());
        t.ce += ce.loss * w;
        t.correct += ce.correct;
        for (std::size_t l = 0; l < at.layers.size(); ++l) {
            const auto term = at_loss_precomputed(fwd.taps.at(at.layers[l]), cache->batch(at.layers[l], idx), at);
            t.at_layers[l] += term.value * w;
            t.at += term.value * w;
        }
        t.count += idx.size();
    }
    const double n = static_cast<double>(t.count);
    t.ce /= n;
    t.at /= n;
    for (double& v : t.at_layers) v /= n;
    return t;
}

struct StageResult {
    Network model;
    std::vector<EpochMetrics> metrics;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    double best_val_accuracy = 0.0;
    std::uint64_t initial_conv_hash = 0;
};

/// One optimisation run from an already initialised network.
StageResult run_stage(Network net, const TrainConfig& config, const ATConfig& at, const Splits& data,
                      const Network* extractor, const EpochCallback& on_epoch) {
    std::optional<ExtractorCache> train_cache, val_cache;
    if (!at.layers.empty()) {
        train_cache.emplace(*extractor, data.train, at);
        val_cache.emplace(*extractor, data.val, at);
    }

    StageResult result;
    result.initial_conv_hash = conv_weights_hash(net);
    Adam opt(config.adam);
    Rng shuffle_rng(derive_seed(config.seed, 1));
    Rng dropout_rng(derive_seed(config.seed, 2));

    Network best = net;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(order);
        PassTotals tr;
        tr.at_layers.assign(at.layers.size(), 0.0);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::span<const std::size_t> idx(order.data() + start, std::min(batch, order.size() - start));
            const Tensor x = data.train.batch(idx);
            const auto labels = data.train.batch_labels(config.label, idx);

            net.zero_grad();
            Tape tape;
            ForwardOptions fo;
            fo.mode = Mode::train;
            fo.taps = at.layers;
            fo.rng = &dropout_rng;
            fo.tape = &tape;
            const auto fwd = net.forward(x, fo);

            std::vector<double> terms;
            std::map<int, Tensor> inject;
            for (std::size_t l = 0; l < at.layers.size(); ++l) {
                const int layer = at.layers[l];
                auto term = at_loss_precomputed(fwd.taps.at(layer), train_cache->batch(layer, idx), at);
                terms.push_back(term.value);
                tr.at_layers[l] += term.value * static_cast<double>(idx.size());
                inject.emplace(layer, std::move(term.grad_trained));
            }
            const auto loss = total_loss(fwd.output, labels, terms);
            net.backward(tape, loss.grad_logits, inject);
            opt.step(net.parameters());

            const double w = static_cast<double>(idx.size());
            tr.ce += loss.cross_entropy * w;
            tr.at += loss.at_sum * w;
            tr.correct += loss.correct;
            tr.count += idx.size();
        }
        const auto val = evaluate_objective(net, data.val, config.label, at, val_cache ? &*val_cache : nullptr);

        EpochMetrics m;
        m.epoch = epoch;
        const double n = static_cast<double>(tr.count);
        m.train_ce = tr.ce / n;
        m.train_at = tr.at / n;
        for (double v : tr.at_layers) m.train_at_layers.push_back(v / n);
        m.train_acc = static_cast<double>(tr.correct) / n;
        m.val_ce = val.ce;
        m.val_at = val.at;
        m.val_at_layers = val.at_layers;
        m.val_acc = static_cast<double>(val.correct) / static_cast<double>(val.count);
        m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!std::isfinite(m.train_ce) || !std::isfinite(m.val_loss())) {
            throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
        }
        result.metrics.push_back(m);
        if (on_epoch) on_epoch(m);

        if (m.val_loss() < best_loss) {
            best_loss = m.val_loss();
            best = net;
            result.best_epoch = epoch;
            result.best_val_accuracy = m.val_acc;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    for (auto& p : best.parameters()) p.grad.fill(0.0);
    result.model = std::move(best);
    result.best_val_loss = best_loss;
    return result;
}

Splits normalized(const Splits& data, const NormStats& stats) {
    Splits s = data;
    normalize(s.train.inputs, stats);
    normalize(s.val.inputs, stats);
    normalize(s.test.inputs, stats);
    return s;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Splits& raw, const std::vector<const Network*>& orth,
                  const EpochCallback& on_epoch) {
    config.validate(orth.size());
    const NormStats norm = config.normalize ? compute_norm_stats(raw.train.inputs) : NormStats{};
    const Splits data = config.normalize ? normalized(raw, norm) : raw;

    PresetOptions po;
    po.input_shape = data.train.sample_shape();
    po.num_classes = std::max({data.train.num_classes(config.label), data.val.num_classes(config.label),
                               data.test.num_classes(config.label)});
    po.hidden_units = config.hidden_units;
    po.dropout = config.dropout;
    const ArchConfig arch = make_preset(config.arch_preset, po);

    const ATConfig at = config.effective_at();
    const int depth = at.layers.empty() ? 0 : *std::max_element(at.layers.begin(), at.layers.end());
    for (const Network* o : orth) require_compatible(arch, o->arch(), std::max(depth, 1), "orthogonal checkpoint");

    TrainResult result;
    result.norm = norm;
    Network net = build(arch, config.seed);
    StageResult stage;
    switch (config.strategy) {
        case Strategy::scratch: stage = run_stage(std::move(net), config, at, data, nullptr, on_epoch); break;
        case Strategy::wi:
            init_from(net, *orth[0]);
            stage = run_stage(std::move(net), config, at, data, nullptr, on_epoch);
            break;
        case Strategy::wi_freeze:
            init_from(net, *orth[0], *std::max_element(config.at.layers.begin(), config.at.layers.end()));
            stage = run_stage(std::move(net), config, at, data, nullptr, on_epoch);
            break;
        case Strategy::at:
        case Strategy::at_inverse: stage = run_stage(std::move(net), config, at, data, orth[0], on_epoch); break;
        case Strategy::dual_at: {
            StageResult first = run_stage(std::move(net), config, at, data, orth[0], on_epoch);
            Network second = build(arch, config.seed);
            init_from(second, first.model);
            stage = run_stage(std::move(second), config, at, data, orth[1], on_epoch);
            result.intermediate = std::move(first.model);
            result.intermediate_metrics = std::move(first.metrics);
            break;
        }
    }

    result.model = std::move(stage.model);
    result.metrics = std::move(stage.metrics);
    result.best_epoch = stage.best_epoch;
    result.best_val_loss = stage.best_val_loss;
    result.best_val_accuracy = stage.best_val_accuracy;
    result.initial_conv_hash = stage.initial_conv_hash;
    result.train_accuracy = evaluate(result.model, data.train, config.label).accuracy;
    result.test = evaluate(result.model, data.test, config.label);
    result.test_accuracy = result.test.accuracy;
    result.provenance = {config.task, config.seed, result.best_epoch, std::string(to_string(config.strategy)), norm.mean,
                         norm.std};
    return result;
}

TrainResult pretrain(TrainConfig config, const Splits& data, const EpochCallback& on_epoch) {
    config.strategy = Strategy::scratch;
    return train(config, data, {}, on_epoch);
}

std::size_t select_best(const std::vector<SweepRow>& rows, Selection selection) {
    if (rows.empty()) throw ConfigError("sweep has no rows");
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& a = rows[i];
        const auto& b = rows[best];
        const bool better = selection == Selection::val_accuracy
                                ? a.val_accuracy > b.val_accuracy ||
                                      (a.val_accuracy == b.val_accuracy && a.val_cross_entropy < b.val_cross_entropy)
                                : a.best_val_loss < b.best_val_loss;
        if (better) best = i;
    }
    return best;
}

namespace {

SweepResult run_sweep(const std::vector<TrainConfig>& configs, const Splits& data,
                      const std::vector<const Network*>& orth, Selection selection, int jobs) {
    if (configs.empty()) throw ConfigError("sweep grid is empty");
    for (const auto& c : configs) c.validate(orth.size());
    auto run = [&](const TrainConfig& c) {
        const auto r = train(c, data, orth);
        SweepRow row;
        row.layer = c.at.layers.empty() ? 0 : c.at.layers.front();
        row.beta = c.at.beta;
        row.train_accuracy = r.train_accuracy;
        row.val_accuracy = r.best_val_accuracy;
        row.test_accuracy = r.test_accuracy;
        row.best_val_loss = r.best_val_loss;
        row.val_cross_entropy = r.metrics[static_cast<std::size_t>(r.best_epoch - 1)].val_ce;
        row.best_epoch = r.best_epoch;
        return row;
    };
    SweepResult result;
    result.selection = selection;
    result.rows.resize(configs.size());
    const std::size_t width = static_cast<std::size_t>(std::max(1, jobs));
    for (std::size_t start = 0; start < configs.size(); start += width) {
        std::vector<std::future<SweepRow>> running;
        for (std::size_t i = start; i < std::min(configs.size(), start + width); ++i) {
            running.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred, run,
                                         std::cref(configs[i])));
        }
        for (std::size_t i = 0; i < running.size(); ++i) result.rows[start + i] = running[i].get();
    }
    result.best = select_best(result.rows, selection);
    return result;
}

}  // namespace

SweepResult sweep_layers(const TrainConfig& base, const std::vector<int>& layers, const Splits& data,
                         const std::vector<const Network*>& orth, Selection selection, int jobs) {
    if (layers.empty()) throw ConfigError("layer sweep needs at least one layer");
    std::vector<TrainConfig> configs;
    for (int l : layers) {
        TrainConfig c = base;
        c.at.layers = {l};
        configs.push_back(std::move(c));
    }
    return run_sweep(configs, data, orth, selection, jobs);
}

SweepResult sweep_betas(const TrainConfig& base, const std::vector<double>& betas, const Splits& data,
                        const std::vector<const Network*>& orth, Selection selection, int jobs) {
    if (betas.empty()) throw ConfigError("beta sweep needs at least one value");
    std::vector<TrainConfig> configs;
    for (double b : betas) {
        TrainConfig c = base;
        c.at.beta = b;
        configs.push_back(std::move(c));
    }
    return run_sweep(configs, data, orth, selection, jobs);
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& metrics) {
    std::ostringstream os;
    os << "epoch,train_ce,val_ce,train_at,val_at,train_acc,val_acc,seconds\n";
    for (const auto& m : metrics) {
        os << m.epoch << ',' << fmt(m.train_ce) << ',' << fmt(m.val_ce) << ',' << fmt(m.train_at) << ','
           << fmt(m.val_at) << ',' << fmt(m.train_acc) << ',' << fmt(m.val_acc) << ',' << fmt(m.seconds) << '\n';
    }
    write_file_atomic(path, os.str());
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& sweep) {
    std::ostringstream os;
    os << "layer,beta,train_acc,val_acc,test_acc,val_ce,best_val_loss,best_epoch,best\n";
    for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
        const auto& r = sweep.rows[i];
        os << r.layer << ',' << fmt(r.beta) << ',' << fmt(r.train_accuracy) << ',' << fmt(r.val_accuracy) << ','
           << fmt(r.test_accuracy) << ',' << fmt(r.val_cross_entropy) << ',' << fmt(r.best_val_loss) << ',' << r.best_epoch << ','
           << (i == sweep.best ? 1 : 0) << '\n';
    }
    write_file_atomic(path, os.str());
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"strategy", std::string(to_string(c.strategy))},
            {"at",
             {{"layers", c.at.layers},
              {"beta", c.at.beta},
              {"similarity", std::string(to_string(c.at.similarity))},
              {"aggregation", std::string(to_string(c.at.aggregation))}}},
            {"learning_rate", c.adam.learning_rate},
            {"adam_beta1", c.adam.beta1},
            {"adam_beta2", c.adam.beta2},
            {"adam_epsilon", c.adam.epsilon},
            {"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"label", std::string(to_string(c.label))},
            {"arch", c.arch_preset},
            {"hidden_units", c.hidden_units},
            {"dropout", c.dropout},
            {"seed", c.seed},
            {"normalize", c.normalize},
            {"task", c.task}};
}

nlohmann::json summary_json(const TrainResult& r, const nlohmann::json& config_echo) {
    nlohmann::json confusion = r.test.confusion;
    nlohmann::json j{{"config", config_echo},
                     {"best_epoch", r.best_epoch},
                     {"epochs_run", r.metrics.size()},
                     {"best_val_loss", r.best_val_loss},
                     {"best_val_accuracy", r.best_val_accuracy},
                     {"train_accuracy", r.train_accuracy},
                     {"test_accuracy", r.test_accuracy},
                     {"test_confusion", confusion},
                     {"normalization", {{"mean", r.norm.mean}, {"std", r.norm.std}}},
                     {"provenance",
                      {{"task", r.provenance.task},
                       {"seed", r.provenance.seed},
                       {"epoch", r.provenance.epoch},
                       {"strategy", r.provenance.strategy}}}};
    if (r.intermediate) j["intermediate_epochs_run"] = r.intermediate_metrics.size();
    return j;
}

}  // namespace atl
