#include "atl/tensor_io.hpp"

#include "atl/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace atl {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string take(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    const char* raw(std::size_t n) {
        need(n);
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError("corrupt container: truncated");
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

const Tensor& Container::tensor(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t.tensor;
    }
    throw FormatError("container has no tensor named '" + name + "'");
}

std::string encode_container(const Container& c, DType dtype) {
    std::string out;
    out.append(kContainerMagic, 4);
    put<std::uint32_t>(out, kContainerVersion);
    const std::string header = c.header.dump();
    put<std::uint64_t>(out, header.size());
    out += header;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, t] : c.tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (auto e : t.shape()) put<std::uint64_t>(out, static_cast<std::uint64_t>(e));
        if (dtype == DType::f64) {
            out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
        } else {
            for (double v : t.storage()) put<float>(out, static_cast<float>(v));
        }
    }
    return out;
}

Container decode_container(const std::string& bytes) {
    Reader r(bytes);
    const std::string magic = r.take(4);
    if (std::memcmp(magic.data(), kContainerMagic, 4) != 0) throw FormatError("corrupt container: bad magic");
    const auto version = r.get<std::uint32_t>();
    if (version != kContainerVersion) {
        throw VersionError("container version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kContainerVersion) + ")");
    }
    Container c;
    const auto header_len = r.get<std::uint64_t>();
    if (header_len > bytes.size()) throw FormatError("corrupt container: truncated");
    try {
        c.header = nlohmann::json::parse(r.take(static_cast<std::size_t>(header_len)));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("corrupt container header: ") + e.what());
    }
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor nt;
        nt.name = r.take(r.get<std::uint32_t>());
        const auto dtype = r.get<std::uint8_t>();
        if (dtype != static_cast<std::uint8_t>(DType::f32) && dtype != static_cast<std::uint8_t>(DType::f64)) {
            throw FormatError("corrupt container: unknown dtype tag " + std::to_string(dtype));
        }
        const auto rank = r.get<std::uint32_t>();
        if (rank > 8) throw FormatError("corrupt container: rank " + std::to_string(rank));
        Shape shape;
        std::uint64_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const auto e = r.get<std::uint64_t>();
            if (e > bytes.size() * 8) throw FormatError("corrupt container: implausible extent");
            shape.push_back(static_cast<std::int64_t>(e));
            n *= e;
        }
        std::vector<double> values(static_cast<std::size_t>(n));
        if (dtype == static_cast<std::uint8_t>(DType::f64)) {
            std::memcpy(values.data(), r.raw(values.size() * sizeof(double)), values.size() * sizeof(double));
        } else {
            for (auto& v : values) v = r.get<float>();
        }
        nt.tensor = Tensor(std::move(shape), std::move(values));
        c.tensors.push_back(std::move(nt));
    }
    if (!r.done()) throw FormatError("corrupt container: trailing bytes");
    return c;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_container(const std::filesystem::path& path, const Container& c, DType dtype) {
    write_file_atomic(path, encode_container(c, dtype));
}

Container read_container(const std::filesystem::path& path) {
    return decode_container(read_file(path));
}

}  // namespace atl
