#include "opde/dataset.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "opde/errors.hpp"

namespace opde {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<int> interior_margins(const Dataset& d) {
    std::vector<int> margins;
    for (const Axis& ax : d.axes()) {
        if (ax.name == "t")
            margins.push_back(1);
        else
            margins.push_back(ax.periodic ? 0 : 3);
    }
    return margins;
}

SampleSet full_interior(const Dataset& d) {
    const auto& axes = d.axes();
    const std::vector<int> margins = interior_margins(d);
    SampleSet out;
    std::vector<int> idx(axes.size(), 0);
    const std::size_t total = d.u.size();
    out.indices.reserve(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
        bool inside = true;
        std::size_t rem = flat;
        for (std::size_t k = axes.size(); k-- > 0;) {
            const int i = static_cast<int>(rem % static_cast<std::size_t>(axes[k].n));
            rem /= static_cast<std::size_t>(axes[k].n);
            if (i < margins[k] || i >= axes[k].n - margins[k]) {
                inside = false;
                break;
            }
        }
        if (inside) out.indices.push_back(flat);
    }
    return out;
}

namespace {

std::string sha256_hex(const void* data, std::size_t len) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    if (EVP_Digest(data, len, digest, &digest_len, EVP_sha256(), nullptr) != 1)
        throw IoError("sha256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(digest_len * 2);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

void write_payload(const fs::path& path, const std::vector<double>& values) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!f) throw IoError("short write to " + path.string());
}

std::vector<double> read_payload(const fs::path& path, std::size_t expected,
                                 const std::string& expected_sha) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open " + path.string());
    const std::streamsize bytes = f.tellg();
    if (static_cast<std::size_t>(bytes) != expected * sizeof(double))
        throw IoError("payload " + path.string() + " has wrong size (checksum failure)");
    f.seekg(0);
    std::vector<double> values(expected);
    f.read(reinterpret_cast<char*>(values.data()), bytes);
    if (!f) throw IoError("short read from " + path.string());
    if (sha256_hex(values.data(), values.size() * sizeof(double)) != expected_sha)
        throw IoError("checksum failure for " + path.string());
    return values;
}

json axes_to_json(const std::vector<Axis>& axes) {
    json arr = json::array();
    for (const Axis& a : axes)
        arr.push_back({{"name", a.name}, {"min", a.min}, {"max", a.max},
                       {"n", a.n}, {"periodic", a.periodic}});
    return arr;
}

std::vector<Axis> axes_from_json(const json& arr) {
    std::vector<Axis> axes;
    for (const json& j : arr)
        axes.push_back(Axis{j.at("name").get<std::string>(), j.at("min").get<double>(),
                            j.at("max").get<double>(), j.at("n").get<int>(),
                            j.at("periodic").get<bool>()});
    return axes;
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& dir) {
    if (std::endian::native != std::endian::little)
        throw IoError("dataset format is little-endian; refusing to write on this host");
    fs::create_directories(dir);
    write_payload(fs::path(dir) / "u.f64", d.u.values());
    write_payload(fs::path(dir) / "ut.f64", d.ut.values());

    json meta;
    meta["format_version"] = "1";
    meta["endianness"] = "little";
    meta["system"] = d.system;
    meta["params"] = d.params;
    meta["noise_level"] = d.noise_level;
    meta["sample_fraction"] = d.sample_fraction;
    meta["seed"] = d.seed;
    meta["axes"] = axes_to_json(d.axes());
    meta["sha256"] = {
        {"u.f64", sha256_hex(d.u.values().data(), d.u.values().size() * sizeof(double))},
        {"ut.f64", sha256_hex(d.ut.values().data(), d.ut.values().size() * sizeof(double))},
    };
    std::ofstream f(fs::path(dir) / "meta.json");
    if (!f) throw IoError("cannot write meta.json in " + dir);
    f << meta.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream f(fs::path(dir) / "meta.json");
    if (!f) throw IoError("cannot open " + dir + "/meta.json");
    json meta;
    try {
        f >> meta;
    } catch (const json::exception& e) {
        throw IoError("invalid meta.json in " + dir + ": " + e.what());
    }
    if (meta.at("format_version").get<std::string>() != "1")
        throw IoError("unsupported dataset format version in " + dir);
    if (meta.at("endianness").get<std::string>() != "little")
        throw IoError("dataset " + dir + " uses foreign endianness; cannot load");
    if (std::endian::native != std::endian::little)
        throw IoError("host is not little-endian; cannot load dataset");

    std::vector<Axis> axes = axes_from_json(meta.at("axes"));
    std::size_t total = 1;
    for (const Axis& a : axes) total *= static_cast<std::size_t>(a.n);

    Dataset d;
    d.u = GridField(axes, read_payload(fs::path(dir) / "u.f64", total,
                                       meta.at("sha256").at("u.f64").get<std::string>()));
    d.ut = GridField(axes, read_payload(fs::path(dir) / "ut.f64", total,
                                        meta.at("sha256").at("ut.f64").get<std::string>()));
    d.system = meta.at("system").get<std::string>();
    d.params = meta.at("params").get<std::map<std::string, double>>();
    d.noise_level = meta.at("noise_level").get<double>();
    d.sample_fraction = meta.at("sample_fraction").get<double>();
    d.seed = meta.at("seed").get<std::uint64_t>();
    return d;
}

}  // namespace opde
