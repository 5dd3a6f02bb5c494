#include "paewc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace paewc {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian; add byte swapping for this platform");

void write_payload_block(std::ostream& out, const std::vector<double>& values) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> read_payload_block(const std::string& payload, std::size_t offset,
                                       std::size_t count, const std::string& name) {
    const std::size_t bytes = count * sizeof(double);
    if (offset + bytes > payload.size())
        throw TruncationError("checkpoint payload truncated at block " + name);
    std::vector<double> out(count);
    std::memcpy(out.data(), payload.data() + offset, bytes);
    return out;
}

struct Container {
    json header;
    std::string payload;
};

Container read_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::string header_line;
    if (!std::getline(in, header_line)) throw FormatError("missing header line: " + path);
    Container c;
    try {
        c.header = json::parse(header_line);
    } catch (const json::exception& e) {
        throw FormatError("bad checkpoint header in " + path + ": " + e.what());
    }
    std::ostringstream rest;
    rest << in.rdbuf();
    c.payload = rest.str();

    if (!c.header.contains("version") || !c.header["version"].is_number_integer())
        throw FormatError("header lacks a version field: " + path);
    if (c.header["version"].get<int>() != kCheckpointVersion)
        throw VersionError("unsupported checkpoint version " +
                           std::to_string(c.header["version"].get<int>()) + " in " + path);
    return c;
}

json block_entry(const std::string& name, const Shape& shape, Group group, std::size_t offset) {
    json e;
    e["name"] = name;
    e["shape"] = shape;
    e["group"] = group_name(group);
    e["offset"] = offset;
    return e;
}

}  // namespace

void save_checkpoint(const ParamStore& params, const std::string& path) {
    for (const auto& b : params.blocks())
        for (double v : b.tensor.values())
            if (!std::isfinite(v)) throw NumericError("save_checkpoint: non-finite value in " + b.name);

    json header;
    header["version"] = kCheckpointVersion;
    header["kind"] = "params";
    header["model"] = {{"image_size", params.config.image_size},
                       {"channels", params.config.channels},
                       {"patch_size", params.config.patch_size},
                       {"embed_dim", params.config.embed_dim},
                       {"vocab_size", params.config.vocab_size},
                       {"n_heads", params.config.n_heads}};
    json blocks = json::array();
    std::size_t offset = 0;
    for (const auto& b : params.blocks()) {
        blocks.push_back(block_entry(b.name, b.tensor.shape(), b.group, offset));
        offset += b.tensor.numel() * sizeof(double);
    }
    header["blocks"] = blocks;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write: " + path);
    out << header.dump() << '\n';
    for (const auto& b : params.blocks()) write_payload_block(out, b.tensor.values());
    if (!out) throw IoError("write failed: " + path);
}

ParamStore load_checkpoint(const std::string& path, const ModelConfig& cfg) {
    Container c = read_container(path);
    if (c.header.value("kind", "") != "params")
        throw FormatError("not a parameter checkpoint: " + path);
    if (!c.header.contains("blocks") || !c.header["blocks"].is_array())
        throw FormatError("header lacks blocks: " + path);

    ParamStore expected = build_model(cfg, 0);
    ParamStore out;
    out.config = cfg;
    const auto& blocks = c.header["blocks"];
    if (blocks.size() != expected.size())
        throw ShapeError("checkpoint has " + std::to_string(blocks.size()) + " blocks, model has " +
                         std::to_string(expected.size()));
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& e = blocks[i];
        const std::string name = e.value("name", "");
        const Shape shape = e.value("shape", Shape{});
        const std::size_t offset = e.value("offset", std::size_t{0});
        const auto& want = expected.blocks()[i];
        if (name != want.name) throw FormatError("unexpected block order at " + name);
        if (shape != want.tensor.shape())
            throw ShapeError("block " + name + " has shape " + shape_str(shape) + ", model wants " +
                             shape_str(want.tensor.shape()));
        std::vector<double> values = read_payload_block(c.payload, offset, shape_numel(shape), name);
        out.add(name, Tensor(shape, std::move(values), true));
        out.set_group(name, group_from_name(e.value("group", "unassigned")));
    }
    return out;
}

void save_snapshot(const FisherSnapshot& snap, const std::string& path) {
    json header;
    header["version"] = kCheckpointVersion;
    header["kind"] = "fisher_snapshot";
    header["task_id"] = snap.task_id;
    header["similarity"] = snap.similarity;
    header["complexity"] = snap.complexity;
    json gw = json::object(), st = json::object();
    for (const auto& [g, w] : snap.group_weight) gw[group_name(g)] = w;
    for (const auto& [g, s] : snap.stability) st[group_name(g)] = s;
    header["group_weight"] = gw;
    header["stability"] = st;

    json blocks = json::array();
    std::size_t offset = 0;
    for (const auto& [name, fisher] : snap.fisher) {
        const auto& anchor = snap.anchor.at(name);
        json e;
        e["name"] = name;
        e["count"] = fisher.size();
        e["group"] = group_name(snap.groups.at(name));
        e["fisher_offset"] = offset;
        offset += fisher.size() * sizeof(double);
        e["anchor_offset"] = offset;
        offset += anchor.size() * sizeof(double);
        blocks.push_back(e);
    }
    header["blocks"] = blocks;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write: " + path);
    out << header.dump() << '\n';
    for (const auto& [name, fisher] : snap.fisher) {
        write_payload_block(out, fisher);
        write_payload_block(out, snap.anchor.at(name));
    }
    if (!out) throw IoError("write failed: " + path);
}

FisherSnapshot load_snapshot(const std::string& path) {
    Container c = read_container(path);
    if (c.header.value("kind", "") != "fisher_snapshot")
        throw FormatError("not a fisher snapshot: " + path);
    FisherSnapshot snap;
    snap.task_id = c.header.value("task_id", 0);
    snap.similarity = c.header.value("similarity", 1.0);
    snap.complexity = c.header.value("complexity", 0.0);
    for (const auto& [key, value] : c.header.value("group_weight", json::object()).items())
        snap.group_weight[group_from_name(key)] = value.get<double>();
    for (const auto& [key, value] : c.header.value("stability", json::object()).items())
        snap.stability[group_from_name(key)] = value.get<double>();
    for (const auto& e : c.header.value("blocks", json::array())) {
        const std::string name = e.value("name", "");
        const std::size_t count = e.value("count", std::size_t{0});
        snap.groups[name] = group_from_name(e.value("group", "unassigned"));
        snap.fisher[name] =
            read_payload_block(c.payload, e.value("fisher_offset", std::size_t{0}), count, name);
        snap.anchor[name] =
            read_payload_block(c.payload, e.value("anchor_offset", std::size_t{0}), count, name);
    }
    return snap;
}

std::uint64_t file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for digest: " + path);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<std::uint8_t>(buf[i]);
            h *= 0x100000001B3ULL;
        }
        if (in.eof()) break;
    }
    return h;
}

}  // namespace paewc
