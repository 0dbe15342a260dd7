#include "graybox/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "graybox/errors.hpp"

namespace graybox {

namespace {

constexpr char magic[8] = {'G', 'B', 'O', 'X', 'M', 'L', 'P', '\n'};
constexpr std::uint32_t format_version = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        }
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        }
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

void save_checkpoint(const std::string& path, const MlpParams& params) {
    params.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw config_error("cannot open checkpoint for writing: " + path);
    out.write(magic, sizeof(magic));
    write_le<std::uint32_t>(out, format_version);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.hidden()));
    for (double w : params.w1) write_le(out, w);
    for (double b : params.b1) write_le(out, b);
    for (double w : params.w2) write_le(out, w);
    write_le(out, params.b2);
    if (!out) throw config_error("checkpoint write failed: " + path);
}

MlpParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open checkpoint: " + path);
    char got[8];
    in.read(got, sizeof(got));
    if (!in || std::memcmp(got, magic, sizeof(magic)) != 0) {
        throw config_error("not a checkpoint file: " + path);
    }
    const auto version = read_le<std::uint32_t>(in);
    if (version != format_version) {
        throw config_error("unsupported checkpoint version in " + path);
    }
    const auto hidden = read_le<std::uint32_t>(in);
    if (hidden < 1 || hidden > (1u << 20)) {
        throw config_error("implausible hidden width in " + path);
    }
    MlpParams p = MlpParams::zeros(static_cast<int>(hidden));
    for (double& w : p.w1) w = read_le<double>(in);
    for (double& b : p.b1) b = read_le<double>(in);
    for (double& w : p.w2) w = read_le<double>(in);
    p.b2 = read_le<double>(in);
    if (!in) throw config_error("checkpoint truncated: " + path);
    p.validate();
    return p;
}

}  // namespace graybox
