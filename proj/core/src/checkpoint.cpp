#include "msnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "msnet/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace msnet {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'N', 'E', 'T', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
  public:
    explicit Writer(const std::filesystem::path& path)
        : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) fail(ErrorCategory::io, "cannot write " + path.string());
    }

    template <typename T>
    void put(T value) {
        out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
    }

    void put_bytes(const void* data, std::size_t count) {
        out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count));
    }

    void finish() {
        out_.flush();
        if (!out_) fail(ErrorCategory::io, "short write to " + path_.string());
    }

  private:
    std::filesystem::path path_;
    std::ofstream out_;
};

class Reader {
  public:
    explicit Reader(const std::filesystem::path& path)
        : path_(path), in_(path, std::ios::binary) {
        if (!in_) fail(ErrorCategory::io, "cannot open " + path.string());
    }

    template <typename T>
    T get(const char* what) {
        T value{};
        in_.read(reinterpret_cast<char*>(&value), sizeof(T));
        if (in_.gcount() != sizeof(T))
            fail(ErrorCategory::parse, path_.string() + ": truncated checkpoint reading " + what +
                                           " at byte " + std::to_string(offset_));
        offset_ += sizeof(T);
        return value;
    }

    void get_bytes(void* data, std::size_t count, const char* what) {
        in_.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count));
        if (static_cast<std::size_t>(in_.gcount()) != count)
            fail(ErrorCategory::parse, path_.string() + ": truncated checkpoint reading " + what +
                                           " at byte " + std::to_string(offset_));
        offset_ += count;
    }

    [[noreturn]] void parse_fail(const std::string& what) {
        fail(ErrorCategory::parse, path_.string() + ": " + what);
    }

    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

  private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
    Writer w(path);
    w.put_bytes(kMagic, sizeof(kMagic));
    w.put<std::uint32_t>(kVersion);
    const ModelConfig& c = params.config;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.input_size));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.channels));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.pyramid_depth));
    w.put<std::uint8_t>(c.fusion_mode == FusionMode::add ? 1 : 0);
    w.put<std::uint8_t>(c.lossnet_enabled ? 1 : 0);
    w.put<std::uint16_t>(0);
    w.put<std::uint64_t>(c.seed);

    const auto tensors = params.named_tensors();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        const Shape& shape = t.shape();
        w.put<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
        for (int e : shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(e));
        w.put_bytes(t.values().data(), t.values().size() * sizeof(double));
    }
    w.finish();
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    Reader r(path);
    char magic[8];
    r.get_bytes(magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        r.parse_fail("not a checkpoint file (bad magic at byte 0)");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kVersion)
        r.parse_fail("unsupported checkpoint version " + std::to_string(version));

    ModelConfig config;
    config.input_size = static_cast<int>(r.get<std::uint32_t>("input_size"));
    config.channels = static_cast<int>(r.get<std::uint32_t>("channels"));
    config.pyramid_depth = static_cast<int>(r.get<std::uint32_t>("pyramid_depth"));
    const auto fusion = r.get<std::uint8_t>("fusion_mode");
    if (fusion > 1) r.parse_fail("invalid fusion_mode byte " + std::to_string(fusion));
    config.fusion_mode = fusion == 1 ? FusionMode::add : FusionMode::subtract;
    config.lossnet_enabled = r.get<std::uint8_t>("lossnet_enabled") != 0;
    r.get<std::uint16_t>("reserved");
    config.seed = r.get<std::uint64_t>("seed");
    config.validate();

    ModelParams params = init_params(config);
    auto tensors = params.named_tensors();
    const auto count = r.get<std::uint32_t>("tensor count");
    if (count != tensors.size())
        r.parse_fail("tensor count " + std::to_string(count) + " does not match architecture (" +
                     std::to_string(tensors.size()) + " expected)");
    for (auto& [name, t] : tensors) {
        const auto rank = r.get<std::uint32_t>(name.c_str());
        if (rank != t.shape().size())
            r.parse_fail("tensor " + name + ": rank " + std::to_string(rank) + ", expected " +
                         std::to_string(t.shape().size()));
        Shape shape(rank);
        for (auto& e : shape) e = static_cast<int>(r.get<std::uint32_t>(name.c_str()));
        if (shape != t.shape())
            r.parse_fail("tensor " + name + ": shape " + shape_str(shape) + ", expected " +
                         shape_str(t.shape()));
        r.get_bytes(t.values().data(), t.values().size() * sizeof(double), name.c_str());
    }
    if (!r.at_eof()) r.parse_fail("trailing bytes after last tensor");
    return params;
}

}  // namespace msnet
