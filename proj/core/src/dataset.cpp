#include "atl/dataset.hpp"

#include "atl/errors.hpp"
#include "atl/tensor_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace atl {

std::string_view to_string(LabelKey key) {
    switch (key) {
        case LabelKey::target: return "target";
        case LabelKey::orth1: return "orth1";
        case LabelKey::orth2: return "orth2";
    }
    return "target";
}

LabelKey label_key_from_string(std::string_view name) {
    if (name == "target") return LabelKey::target;
    if (name == "orth1") return LabelKey::orth1;
    if (name == "orth2") return LabelKey::orth2;
    throw ConfigError("unknown label '" + std::string(name) + "' (target, orth1, orth2)");
}

Shape Dataset::sample_shape() const {
    return Shape(inputs.shape().begin() + 1, inputs.shape().end());
}

const std::vector<int>& Dataset::labels(LabelKey key) const {
    switch (key) {
        case LabelKey::target: return target;
        case LabelKey::orth1: return orth1;
        case LabelKey::orth2:
            if (orth2.empty()) throw ConfigError("dataset has no second orthogonal label");
            return orth2;
    }
    return target;
}

int Dataset::num_classes(LabelKey key) const {
    const auto& l = labels(key);
    return l.empty() ? 0 : *std::max_element(l.begin(), l.end()) + 1;
}

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
    Shape s = inputs.shape();
    s[0] = static_cast<std::int64_t>(indices.size());
    Tensor out(s);
    const auto stride = static_cast<std::size_t>(numel(sample_shape()));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= size()) throw ShapeError("dataset index out of range");
        std::copy_n(inputs.data() + indices[i] * stride, stride, out.data() + i * stride);
    }
    return out;
}

std::vector<int> Dataset::batch_labels(LabelKey key, std::span<const std::size_t> indices) const {
    const auto& l = labels(key);
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(l[i]);
    return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset d;
    d.inputs = batch(indices);
    for (auto i : indices) {
        d.target.push_back(target[i]);
        d.orth1.push_back(orth1[i]);
        if (!orth2.empty()) d.orth2.push_back(orth2[i]);
    }
    return d;
}

Dataset make_dataset(const std::vector<Tensor>& samples, std::vector<int> target, std::vector<int> orth1,
                     std::vector<int> orth2) {
    if (samples.empty()) throw ConfigError("dataset has no samples");
    if (target.size() != samples.size() || orth1.size() != samples.size() ||
        (!orth2.empty() && orth2.size() != samples.size())) {
        throw ConfigError("dataset label counts do not match the sample count");
    }
    Shape sample = samples.front().shape();
    if (sample.size() == 4 && sample[0] == 1) sample.erase(sample.begin());
    if (sample.size() != 3) throw ShapeError("dataset samples must be [C,H,W], got " + to_string(sample));
    Shape s{static_cast<std::int64_t>(samples.size())};
    s.insert(s.end(), sample.begin(), sample.end());
    Dataset d;
    d.inputs = Tensor(s);
    const auto stride = static_cast<std::size_t>(numel(sample));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].size() != stride) {
            throw ShapeError("sample " + std::to_string(i) + " has shape " + to_string(samples[i].shape()) +
                             ", expected " + to_string(sample));
        }
        std::copy_n(samples[i].data(), stride, d.inputs.data() + i * stride);
    }
    d.target = std::move(target);
    d.orth1 = std::move(orth1);
    d.orth2 = std::move(orth2);
    return d;
}

namespace {

int parse_label(const std::string& field, const std::filesystem::path& path, int line) {
    int v = 0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc{} || ptr != end || v < 0) {
        throw FormatError(path.string() + ":" + std::to_string(line) + ": bad label '" + field + "'");
    }
    return v;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

}  // namespace

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    std::vector<ManifestRow> rows;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(trim(f));
        if (number == 1 && !fields.empty() && fields[0] == "path") continue;
        if (fields.size() < 3 || fields.size() > 4) {
            throw FormatError(path.string() + ":" + std::to_string(number) +
                              ": expected path,target_label,orth_label_1[,orth_label_2]");
        }
        ManifestRow r;
        r.path = fields[0];
        r.target = parse_label(fields[1], path, number);
        r.orth1 = parse_label(fields[2], path, number);
        if (fields.size() == 4) r.orth2 = parse_label(fields[3], path, number);
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw FormatError("manifest " + path.string() + " has no rows");
    const bool dual = rows.front().orth2 >= 0;
    for (const auto& r : rows) {
        if ((r.orth2 >= 0) != dual) throw FormatError("manifest " + path.string() + " mixes 3- and 4-column rows");
    }
    return rows;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
    std::ostringstream os;
    for (const auto& r : rows) {
        os << r.path << ',' << r.target << ',' << r.orth1;
        if (r.orth2 >= 0) os << ',' << r.orth2;
        os << '\n';
    }
    write_file_atomic(path, os.str());
}

Dataset load_manifest(const std::filesystem::path& path, const StftOptions& stft, double duration_s) {
    const auto rows = read_manifest(path);
    const auto base = path.parent_path();
    std::map<std::string, Container> containers;
    std::vector<Tensor> samples;
    std::vector<int> target, orth1, orth2;
    for (const auto& r : rows) {
        auto push = [&](Tensor t) {
            samples.push_back(std::move(t));
            target.push_back(r.target);
            orth1.push_back(r.orth1);
            if (r.orth2 >= 0) orth2.push_back(r.orth2);
        };
        const auto hash = r.path.find(".atck#");
        if (hash != std::string::npos) {
            const std::string file = r.path.substr(0, hash + 5);
            const std::string name = r.path.substr(hash + 6);
            auto it = containers.find(file);
            if (it == containers.end()) it = containers.emplace(file, read_container(base / file)).first;
            push(it->second.tensor(name));
        } else {
            for (const auto& s : preprocess(read_wav(base / r.path), duration_s, stft)) push(s.to_tensor());
        }
    }
    return make_dataset(samples, std::move(target), std::move(orth1), std::move(orth2));
}

std::filesystem::path save_dataset(const Dataset& data, const std::filesystem::path& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    Container c;
    c.header = {{"kind", "dataset"}, {"samples", data.size()}, {"sample_shape", data.sample_shape()}};
    std::vector<ManifestRow> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
        char tag[32];
        std::snprintf(tag, sizeof tag, "x%06zu", i);
        const std::size_t idx[] = {i};
        Tensor t = data.batch(idx);
        c.tensors.push_back({tag, t.reshaped(data.sample_shape())});
        rows.push_back({name + ".atck#" + tag, data.target[i], data.orth1[i], data.orth2.empty() ? -1 : data.orth2[i]});
    }
    write_container(dir / (name + ".atck"), c);
    const auto manifest = dir / (name + ".csv");
    write_manifest(manifest, rows);
    return manifest;
}

}  // namespace atl
