#include "tipscan/model_io.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include "tipscan/error.hpp"
#include "tipscan/image_io.hpp"

namespace tipscan {

namespace {

constexpr std::size_t kMagicLength = sizeof(kModelMagic) - 1;

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
    void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(bits);
    }
    std::string raw(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > in_.size()) throw Error("model file truncated");
    }
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const NetworkSpec& spec, const ModelParams& params) {
    Writer w;
    w.raw(std::string_view(kModelMagic, kMagicLength));
    w.u32(kModelFormatVersion);
    w.u32(static_cast<std::uint32_t>(spec.name.size()));
    w.raw(spec.name);
    w.u32(static_cast<std::uint32_t>(spec.input.h));
    std::uint32_t tensors = 0;
    for (const auto& layer : params.layers) tensors += static_cast<std::uint32_t>(layer.size());
    w.u32(tensors);
    for (const auto& layer : params.layers) {
        for (const auto& t : layer) {
            const auto& s = t.shape();
            w.u32(static_cast<std::uint32_t>(s.n));
            w.u32(static_cast<std::uint32_t>(s.c));
            w.u32(static_cast<std::uint32_t>(s.h));
            w.u32(static_cast<std::uint32_t>(s.w));
            for (double v : t.values()) w.f64(v);
        }
    }
    return w.take();
}

StoredModel deserialize_model(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    if (r.raw(kMagicLength) != std::string_view(kModelMagic, kMagicLength)) {
        throw Error("not a tipscan model file (bad magic)");
    }
    const auto version = r.u32();
    if (version != kModelFormatVersion) {
        throw Error("unsupported model format version " + std::to_string(version));
    }
    const auto name = r.raw(r.u32());
    const auto side = static_cast<int>(r.u32());
    StoredModel out;
    out.spec = build_architecture(name, side);
    out.params = allocate_params(out.spec);
    const auto tensors = r.u32();
    std::uint32_t expected = 0;
    for (const auto& layer : out.params.layers) expected += static_cast<std::uint32_t>(layer.size());
    if (tensors != expected) {
        throw Error("model tensor count " + std::to_string(tensors) + " does not match " + name);
    }
    for (auto& layer : out.params.layers) {
        for (auto& t : layer) {
            Shape4 s{static_cast<int>(r.u32()), static_cast<int>(r.u32()),
                     static_cast<int>(r.u32()), static_cast<int>(r.u32())};
            if (!(s == t.shape())) {
                throw Error("model tensor shape " + to_string(s) + " does not match " +
                            to_string(t.shape()));
            }
            for (auto& v : t.values()) v = r.f64();
        }
    }
    if (!r.done()) throw Error("trailing bytes after model data");
    if (!out.params.all_finite()) throw Error("model contains non-finite weights");
    return out;
}

std::filesystem::path model_sidecar_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".layers.txt";
    return p;
}

void save_model(const std::filesystem::path& path, const NetworkSpec& spec,
                const ModelParams& params) {
    write_file_atomic(path, serialize_model(spec, params));
    std::ostringstream text;
    text << "architecture " << spec.name << "\n";
    text << "input " << spec.input.c << "x" << spec.input.h << "x" << spec.input.w << "\n";
    text << "parameters " << params.parameter_count() << "\n";
    const auto dims = infer_dims(spec);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        text << i << " " << to_string(spec.layers[i].kind) << " -> " << dims[i].c << "x"
             << dims[i].h << "x" << dims[i].w;
        for (const auto& t : params.layers[i]) text << " " << to_string(t.shape());
        text << "\n";
    }
    const auto s = text.str();
    write_file_atomic(model_sidecar_path(path),
                      std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

StoredModel load_model(const std::filesystem::path& path) {
    try {
        return deserialize_model(read_file_bytes(path));
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

}  // namespace tipscan
