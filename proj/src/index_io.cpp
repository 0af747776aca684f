#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "cubeqa/index.hpp"
#include "cubeqa/schema_json.hpp"

namespace cubeqa {

using nlohmann::json;

namespace {

constexpr std::uint32_t kFormatVersion = 1;
constexpr char kPostingsMagic[4] = {'C', 'Q', 'P', 'T'};
constexpr char kDocTagsMagic[4] = {'C', 'Q', 'D', 'T'};
constexpr char kEmbeddingsMagic[4] = {'C', 'Q', 'E', 'M'};

struct CorruptIndexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u32(out, bits);
}

void put_string(std::string& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s.data(), s.size());
}

struct ByteReader {
    std::string_view data;
    std::size_t pos = 0;
    std::string context;

    void need(std::size_t n) const {
        if (pos + n > data.size())
            throw CorruptIndexError("index: truncated " + context + " section");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= std::uint32_t(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= std::uint64_t(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
    std::string str() {
        std::uint32_t n = u32();
        need(n);
        std::string s(data.substr(pos, n));
        pos += n;
        return s;
    }
    void magic(const char expected[4]) {
        need(4);
        if (std::memcmp(data.data() + pos, expected, 4) != 0)
            throw CorruptIndexError("index: bad magic in " + context + " section");
        pos += 4;
    }
    void done() const {
        if (pos != data.size())
            throw CorruptIndexError("index: trailing bytes in " + context + " section");
    }
};

std::string serialize_postings(const std::map<std::string, std::vector<std::string>>& by_value) {
    std::string out;
    out.append(kPostingsMagic, 4);
    put_u32(out, kFormatVersion);
    put_u64(out, by_value.size());
    for (const auto& [value, ids] : by_value) {
        put_string(out, value);
        put_u64(out, ids.size());
        for (const auto& id : ids) put_string(out, id);
    }
    return out;
}

std::map<std::string, std::vector<std::string>> parse_postings(std::string_view bytes,
                                                               const std::string& dim) {
    ByteReader r{bytes, 0, "postings(" + dim + ")"};
    r.magic(kPostingsMagic);
    if (r.u32() != kFormatVersion)
        throw std::runtime_error("index: postings format version mismatch for '" + dim + "'");
    std::map<std::string, std::vector<std::string>> by_value;
    std::uint64_t value_count = r.u64();
    for (std::uint64_t i = 0; i < value_count; ++i) {
        std::string value = r.str();
        std::uint64_t id_count = r.u64();
        std::vector<std::string> ids;
        ids.reserve(id_count);
        for (std::uint64_t k = 0; k < id_count; ++k) ids.push_back(r.str());
        by_value.emplace(std::move(value), std::move(ids));
    }
    r.done();
    return by_value;
}

std::string serialize_doc_tags(const std::map<std::string, DimensionTags>& doc_tags) {
    std::string out;
    out.append(kDocTagsMagic, 4);
    put_u32(out, kFormatVersion);
    put_u64(out, doc_tags.size());
    for (const auto& [doc_id, tags] : doc_tags) {
        put_string(out, doc_id);
        put_u32(out, static_cast<std::uint32_t>(tags.size()));
        for (const auto& [dim, values] : tags) {
            put_string(out, dim);
            put_u64(out, values.size());
            for (const auto& v : values) put_string(out, v);
        }
    }
    return out;
}

std::map<std::string, DimensionTags> parse_doc_tags(std::string_view bytes) {
    ByteReader r{bytes, 0, "doc_tags"};
    r.magic(kDocTagsMagic);
    if (r.u32() != kFormatVersion)
        throw std::runtime_error("index: doc_tags format version mismatch");
    std::map<std::string, DimensionTags> doc_tags;
    std::uint64_t doc_count = r.u64();
    for (std::uint64_t i = 0; i < doc_count; ++i) {
        std::string doc_id = r.str();
        std::uint32_t dim_count = r.u32();
        DimensionTags tags;
        for (std::uint32_t d = 0; d < dim_count; ++d) {
            std::string dim = r.str();
            std::uint64_t value_count = r.u64();
            std::vector<std::string> values;
            values.reserve(value_count);
            for (std::uint64_t k = 0; k < value_count; ++k) values.push_back(r.str());
            tags.emplace(std::move(dim), std::move(values));
        }
        doc_tags.emplace(std::move(doc_id), std::move(tags));
    }
    r.done();
    return doc_tags;
}

std::string serialize_embeddings(const ValueEmbeddings& embeddings) {
    std::string out;
    out.append(kEmbeddingsMagic, 4);
    put_u32(out, kFormatVersion);
    std::uint32_t dim =
        embeddings.empty() ? 0 : static_cast<std::uint32_t>(embeddings.begin()->second.size());
    put_u32(out, dim);
    put_u64(out, embeddings.size());
    for (const auto& [value, vec] : embeddings) {
        put_string(out, value);
        for (float x : vec) put_f32(out, x);
    }
    return out;
}

ValueEmbeddings parse_embeddings(std::string_view bytes) {
    ByteReader r{bytes, 0, "embeddings"};
    r.magic(kEmbeddingsMagic);
    if (r.u32() != kFormatVersion)
        throw std::runtime_error("index: embeddings format version mismatch");
    std::uint32_t dim = r.u32();
    std::uint64_t count = r.u64();
    ValueEmbeddings embeddings;
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string value = r.str();
        std::vector<float> vec(dim);
        double norm_sq = 0;
        for (auto& x : vec) {
            x = r.f32();
            norm_sq += double(x) * double(x);
        }
        if (std::abs(norm_sq - 1.0) > 3e-6)
            throw CorruptIndexError("index: stored embedding for '" + value +
                                    "' is not unit-norm");
        embeddings.emplace(std::move(value), std::move(vec));
    }
    r.done();
    return embeddings;
}

std::string slug(std::string_view name) {
    std::string out;
    for (char c : name) {
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'))
            out.push_back(c);
        else if (c >= 'A' && c <= 'Z')
            out.push_back(static_cast<char>(c - 'A' + 'a'));
        else
            out.push_back('_');
    }
    if (out.size() > 40) out.resize(40);
    return out;
}

std::string crc_hex(std::string_view data) {
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x", crc32(data));
    return buf;
}

struct Section {
    std::string file;
    std::string bytes;
};

// Assembles every persisted section in canonical order. The manifest is
// built afterwards from the section checksums.
std::vector<std::pair<std::string, Section>> collect_sections(const CubeIndex& index) {
    std::vector<std::pair<std::string, Section>> sections;  // (label, section)
    std::size_t dim_no = 0;
    for (const auto& [dim, by_value] : index.postings()) {
        char prefix[16];
        std::snprintf(prefix, sizeof(prefix), "postings_%03zu_", dim_no++);
        sections.push_back(
            {dim, Section{prefix + slug(dim) + ".bin", serialize_postings(by_value)}});
    }
    sections.push_back({"", Section{"doc_tags.bin", serialize_doc_tags(index.doc_tags())}});
    if (!index.value_embeddings().empty())
        sections.push_back(
            {"", Section{"embeddings.bin", serialize_embeddings(index.value_embeddings())}});
    return sections;
}

json build_manifest(const CubeIndex& index,
                    const std::vector<std::pair<std::string, Section>>& sections) {
    json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["cube"] = cube_spec_to_json(index.spec());
    json postings = json::array();
    for (const auto& [dim, sec] : sections) {
        json entry = {{"file", sec.file},
                      {"crc32", crc_hex(sec.bytes)},
                      {"bytes", sec.bytes.size()}};
        if (sec.file.rfind("postings_", 0) == 0) {
            entry["dimension"] = dim;
            postings.push_back(entry);
        } else if (sec.file == "doc_tags.bin") {
            manifest["doc_tags"] = entry;
        } else {
            manifest["embeddings"] = entry;
        }
    }
    manifest["postings"] = std::move(postings);
    return manifest;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("index: cannot open " + p.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

void write_file(const std::filesystem::path& p, std::string_view data) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("index: cannot write " + p.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("index: write failed for " + p.string());
}

}  // namespace

std::uint32_t crc32(std::string_view data) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xFFFFFFFFu;
    for (unsigned char byte : data) c = table[(c ^ byte) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void save_index(const CubeIndex& index, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto sections = collect_sections(index);
    json manifest = build_manifest(index, sections);
    std::string manifest_text = manifest.dump(2);
    manifest_text.push_back('\n');

    for (const auto& [dim, sec] : sections) write_file(dir / sec.file, sec.bytes);
    write_file(dir / "manifest.json", manifest_text);
    write_file(dir / "manifest.crc32", crc_hex(manifest_text) + "\n");
}

CubeIndex load_index(const std::filesystem::path& dir) {
    std::string manifest_text = read_file(dir / "manifest.json");
    std::string stored_crc = read_file(dir / "manifest.crc32");
    while (!stored_crc.empty() && (stored_crc.back() == '\n' || stored_crc.back() == '\r'))
        stored_crc.pop_back();
    if (crc_hex(manifest_text) != stored_crc)
        throw std::runtime_error("index: manifest checksum mismatch in " + dir.string());

    json manifest = json::parse(manifest_text, nullptr, false);
    if (manifest.is_discarded())
        throw std::runtime_error("index: unreadable manifest in " + dir.string());
    if (manifest.value("format_version", 0u) != kFormatVersion)
        throw std::runtime_error("index: format version mismatch in " + dir.string() +
                                 " (found " +
                                 std::to_string(manifest.value("format_version", 0u)) +
                                 ", expected " + std::to_string(kFormatVersion) + ")");

    auto checked_read = [&](const json& entry, const std::string& what) {
        std::string bytes = read_file(dir / entry.value("file", ""));
        if (crc_hex(bytes) != entry.value("crc32", ""))
            throw std::runtime_error("index: checksum mismatch for " + what + " in " +
                                     dir.string());
        return bytes;
    };

    CubeIndex index(cube_spec_from_json(manifest.at("cube")));
    for (const auto& entry : manifest.value("postings", json::array())) {
        std::string dim = entry.value("dimension", "");
        std::string bytes = checked_read(entry, "postings of '" + dim + "'");
        index.postings_.emplace(dim, parse_postings(bytes, dim));
    }
    if (manifest.contains("doc_tags"))
        index.doc_tags_ = parse_doc_tags(checked_read(manifest["doc_tags"], "doc_tags"));
    if (manifest.contains("embeddings"))
        index.value_embeddings_ =
            parse_embeddings(checked_read(manifest["embeddings"], "embeddings"));
    return index;
}

std::string canonical_serialization(const CubeIndex& index) {
    auto sections = collect_sections(index);
    json manifest = build_manifest(index, sections);
    std::string out = manifest.dump(2);
    out.push_back('\n');
    for (const auto& [dim, sec] : sections) out += sec.bytes;
    return out;
}

}  // namespace cubeqa
