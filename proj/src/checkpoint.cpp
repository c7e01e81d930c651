#include "gram/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "gram/common.hpp"

namespace gram {

namespace {
constexpr char kMagic[8] = {'G', 'R', 'A', 'M', 'C', 'K', 'P', '1'};

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ContractError("checkpoint " + path + ": truncated file");
    return v;
}
}  // namespace

void save_checkpoint(const ParamRegistry& reg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractError("checkpoint: cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    write_raw<uint64_t>(out, reg.params().size());
    for (const auto& [name, t] : reg.params()) {
        write_raw<uint32_t>(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_raw<uint32_t>(out, static_cast<uint32_t>(t.shape().size()));
        for (int64_t d : t.shape()) write_raw<uint64_t>(out, static_cast<uint64_t>(d));
        out.write(reinterpret_cast<const char*>(t.data().data()),
                  static_cast<std::streamsize>(t.data().size() * sizeof(double)));
    }
    if (!out) throw ContractError("checkpoint: write failed for " + path);
}

void load_checkpoint(ParamRegistry& reg, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ContractError("checkpoint " + path + ": bad magic");
    const auto count = read_raw<uint64_t>(in, path);
    if (count != reg.params().size())
        throw ContractError("checkpoint " + path + ": holds " + std::to_string(count) +
                            " parameters, model has " + std::to_string(reg.params().size()));
    for (uint64_t i = 0; i < count; ++i) {
        const auto name_len = read_raw<uint32_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rank = read_raw<uint32_t>(in, path);
        Shape shape(rank);
        for (uint32_t d = 0; d < rank; ++d)
            shape[d] = static_cast<int64_t>(read_raw<uint64_t>(in, path));
        Tensor* t = reg.find(name);
        if (!t) throw ContractError("checkpoint " + path + ": unknown parameter " + name);
        if (t->shape() != shape)
            throw ContractError("checkpoint " + path + ": parameter " + name + " has shape " +
                                shape_str(shape) + ", model expects " + shape_str(t->shape()));
        in.read(reinterpret_cast<char*>(t->data().data()),
                static_cast<std::streamsize>(t->data().size() * sizeof(double)));
        if (!in) throw ContractError("checkpoint " + path + ": truncated at " + name);
    }
}

}  // namespace gram
