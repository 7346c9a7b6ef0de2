#include "cli/config.hpp"

#include "atl/errors.hpp"
#include "atl/tensor_io.hpp"

#include <charconv>
#include <functional>
#include <limits>
#include <sstream>

namespace atl::cli {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view text, std::string_view what) {
    text = trim(text);
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError("expected " + std::string(what) + ", got '" + std::string(text) + "'");
    }
    return value;
}

int parse_int(std::string_view s) { return parse_number<int>(s, "an integer"); }
std::uint64_t parse_u64(std::string_view s) { return parse_number<std::uint64_t>(s, "a non-negative integer"); }
double parse_double(std::string_view s) { return parse_number<double>(s, "a number"); }

bool parse_bool(std::string_view s) {
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("expected true/false, got '" + std::string(s) + "'");
}

std::string fmt(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <class T>
std::string join(const std::vector<T>& items) {
    std::ostringstream os;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) os << ',';
        if constexpr (std::is_same_v<T, double>) {
            os << fmt(items[i]);
        } else {
            os << items[i];
        }
    }
    return os.str();
}

std::vector<std::string_view> split_commas(std::string_view text) {
    std::vector<std::string_view> out;
    text = trim(text);
    if (text.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        out.push_back(trim(text.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

struct Field {
    std::string key;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define ATL_INT(KEY, MEMBER) \
    Field { KEY, [](ExperimentConfig& c, std::string_view v) { c.MEMBER = parse_int(v); }, \
            [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); } }
#define ATL_U64(KEY, MEMBER) \
    Field { KEY, [](ExperimentConfig& c, std::string_view v) { c.MEMBER = parse_u64(v); }, \
            [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); } }
#define ATL_DOUBLE(KEY, MEMBER) \
    Field { KEY, [](ExperimentConfig& c, std::string_view v) { c.MEMBER = parse_double(v); }, \
            [](const ExperimentConfig& c) { return fmt(c.MEMBER); } }
#define ATL_BOOL(KEY, MEMBER) \
    Field { KEY, [](ExperimentConfig& c, std::string_view v) { c.MEMBER = parse_bool(v); }, \
            [](const ExperimentConfig& c) { return std::string(c.MEMBER ? "true" : "false"); } }
#define ATL_STRING(KEY, MEMBER) \
    Field { KEY, [](ExperimentConfig& c, std::string_view v) { c.MEMBER = std::string(trim(v)); }, \
            [](const ExperimentConfig& c) { return c.MEMBER; } }
#define ATL_ENUM(KEY, MEMBER, PARSE) \
    Field { KEY, [](ExperimentConfig& c, std::string_view v) { c.MEMBER = PARSE(trim(v)); }, \
            [](const ExperimentConfig& c) { return std::string(to_string(c.MEMBER)); } }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        ATL_STRING("data.source", data_source),
        ATL_ENUM("data.split", split_policy, split_policy_from_string),
        ATL_U64("data.split_seed", split_seed),
        ATL_ENUM("data.split_group", split_group, label_key_from_string),
        ATL_DOUBLE("audio.duration", audio_duration),
        ATL_DOUBLE("audio.window_ms", stft.window_ms),
        ATL_DOUBLE("audio.overlap", stft.overlap),
        ATL_BOOL("audio.log_magnitude", stft.log_magnitude),
        ATL_BOOL("audio.center", stft.center),
        ATL_INT("synth.target_classes", synth.target_classes),
        ATL_INT("synth.orth_classes", synth.orth_classes),
        ATL_INT("synth.train_samples", synth.train_samples),
        ATL_INT("synth.val_samples", synth.val_samples),
        ATL_INT("synth.test_samples", synth.test_samples),
        ATL_DOUBLE("synth.train_correlation", synth.train_correlation),
        ATL_DOUBLE("synth.test_correlation", synth.test_correlation),
        ATL_INT("synth.frames", synth.frames),
        ATL_INT("synth.bins", synth.bins),
        ATL_DOUBLE("synth.noise", synth.noise),
        ATL_DOUBLE("synth.target_amplitude", synth.target_amplitude),
        ATL_DOUBLE("synth.orth_amplitude", synth.orth_amplitude),
        ATL_INT("synth.target_jitter", synth.target_jitter),
        ATL_U64("synth.seed", synth.seed),
        ATL_STRING("model.preset", train.arch_preset),
        ATL_INT("model.hidden_units", train.hidden_units),
        ATL_DOUBLE("model.dropout", train.dropout),
        ATL_ENUM("train.strategy", train.strategy, strategy_from_string),
        ATL_ENUM("train.label", train.label, label_key_from_string),
        ATL_DOUBLE("train.learning_rate", train.adam.learning_rate),
        ATL_DOUBLE("train.adam_beta1", train.adam.beta1),
        ATL_DOUBLE("train.adam_beta2", train.adam.beta2),
        ATL_DOUBLE("train.adam_epsilon", train.adam.epsilon),
        ATL_INT("train.batch_size", train.batch_size),
        ATL_INT("train.max_epochs", train.max_epochs),
        ATL_INT("train.patience", train.patience),
        ATL_U64("train.seed", train.seed),
        ATL_BOOL("train.normalize", train.normalize),
        ATL_ENUM("train.selection", selection, selection_from_string),
        Field{"at.layers", [](ExperimentConfig& c, std::string_view v) { c.train.at.layers = parse_int_list(v); },
              [](const ExperimentConfig& c) { return join(c.train.at.layers); }},
        ATL_DOUBLE("at.beta", train.at.beta),
        ATL_ENUM("at.similarity", train.at.similarity, similarity_from_string),
        ATL_ENUM("at.aggregation", train.at.aggregation, aggregation_from_string),
        Field{"orth.checkpoints",
              [](ExperimentConfig& c, std::string_view v) {
                  c.orth_checkpoints.clear();
                  for (auto p : split_commas(v)) c.orth_checkpoints.emplace_back(p);
              },
              [](const ExperimentConfig& c) { return join(c.orth_checkpoints); }},
        ATL_STRING("task.name", train.task),
        ATL_STRING("output.dir", output_dir),
    };
    return table;
}

#undef ATL_INT
#undef ATL_U64
#undef ATL_DOUBLE
#undef ATL_BOOL
#undef ATL_STRING
#undef ATL_ENUM

}  // namespace

std::vector<int> parse_int_list(std::string_view text) {
    std::vector<int> out;
    for (auto item : split_commas(text)) {
        const auto dots = item.find("..");
        if (dots == std::string_view::npos) {
            out.push_back(parse_int(item));
            continue;
        }
        const int lo = parse_int(item.substr(0, dots)), hi = parse_int(item.substr(dots + 2));
        if (hi < lo) throw ConfigError("empty range '" + std::string(item) + "'");
        for (int i = lo; i <= hi; ++i) out.push_back(i);
    }
    return out;
}

std::vector<double> parse_double_list(std::string_view text) {
    std::vector<double> out;
    for (auto item : split_commas(text)) out.push_back(parse_double(item));
    return out;
}

void set_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
    for (const auto& f : fields()) {
        if (f.key == key) {
            f.set(config, value);
            return;
        }
    }
    throw ConfigError("unknown key '" + std::string(key) + "'");
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
}

ExperimentConfig parse_config(std::string_view text, const std::string& origin) {
    ExperimentConfig config;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find('\n', start), text.size());
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto where = origin + ":" + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
        try {
            set_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return parse_config(text, path.string());
}

std::string format_config(const ExperimentConfig& config) {
    std::ostringstream os;
    std::string section;
    for (const auto& f : fields()) {
        const auto prefix = f.key.substr(0, f.key.find('.'));
        if (prefix != section) {
            if (!section.empty()) os << '\n';
            section = prefix;
        }
        os << f.key << " = " << f.get(config) << '\n';
    }
    return os.str();
}

}  // namespace atl::cli
