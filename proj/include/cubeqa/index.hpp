#pragma once
// Sparse multidimensional cube index: per-dimension postings from normalized
// value to sorted doc-id set, per-document tag records, and optional
// unit-norm value embeddings. Unassigned dimensions take no storage.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cubeqa/corpus.hpp"
#include "cubeqa/llm.hpp"
#include "cubeqa/normalize.hpp"
#include "cubeqa/schema.hpp"

namespace cubeqa {

// dimension name -> sorted, deduplicated normalized values
using DimensionTags = std::map<std::string, std::vector<std::string>>;

struct CellKey {
    std::string dimension;
    std::string value;

    auto operator<=>(const CellKey&) const = default;
};

using ValueEmbeddings = std::map<std::string, std::vector<float>>;

class CubeIndex {
public:
    CubeIndex() = default;
    explicit CubeIndex(CubeSpec spec) : spec_(std::move(spec)) { validate_spec(spec_); }

    const CubeSpec& spec() const { return spec_; }

    const std::map<std::string, std::map<std::string, std::vector<std::string>>>& postings()
        const {
        return postings_;
    }
    // nullptr when the cell is empty
    const std::vector<std::string>* postings_for(std::string_view dimension,
                                                 std::string_view value) const;
    const std::map<std::string, DimensionTags>& doc_tags() const { return doc_tags_; }
    const DimensionTags* tags_for(std::string_view doc_id) const;
    const ValueEmbeddings& value_embeddings() const { return value_embeddings_; }

    std::size_t doc_count() const { return doc_tags_.size(); }
    std::size_t cell_count() const;        // occupied (dimension, value) cells
    std::size_t posting_entry_count() const;  // total (doc, dimension, value) entries

    // Inserts one document's tags. Values must be normalized and belong to
    // this cube's dimensions; empty dimensions are dropped. When embed is
    // given, values without a stored embedding get one. Throws on duplicate
    // doc_id or unknown dimension.
    void insert(const std::string& doc_id, const DimensionTags& tags,
                EmbeddingBackend* embed = nullptr);

    bool operator==(const CubeIndex& other) const;

private:
    CubeSpec spec_;
    std::map<std::string, std::map<std::string, std::vector<std::string>>> postings_;
    std::map<std::string, DimensionTags> doc_tags_;
    ValueEmbeddings value_embeddings_;

    friend CubeIndex load_index(const std::filesystem::path& dir);
};

// Drops empty values, normalizes, sorts and dedupes per dimension, drops
// empty dimensions. Dimensions not in spec are dropped with a warning.
DimensionTags canonicalize_tags(const DimensionTags& raw, const CubeSpec& spec,
                                std::vector<std::string>* warnings = nullptr);

// Single extraction pass for one document across every cube's dimensions.
// The backend reply is JSON: {"CUBE_NAME": {"dimension": ["value", ...]}}.
std::string render_tagging_prompt(const Document& doc, std::span<const CubeSpec> specs);
std::map<std::string, DimensionTags> parse_tag_reply(const std::string& reply,
                                                     std::span<const CubeSpec> specs,
                                                     std::vector<std::string>* warnings = nullptr);
// Throws BackendError on backend failure or unparseable reply.
std::map<std::string, DimensionTags> tag_document(const Document& doc,
                                                  std::span<const CubeSpec> specs,
                                                  ChatBackend& chat,
                                                  std::vector<std::string>* warnings = nullptr);

struct BuildReport {
    std::size_t documents_total = 0;
    std::size_t documents_tagged = 0;
    std::vector<std::pair<std::string, std::string>> failures;  // (doc_id, reason)
    std::vector<std::string> warnings;
};

struct BuildResult {
    std::map<std::string, CubeIndex> indexes;  // cube name -> index
    BuildReport report;
};

// Tags every document once and fills all cube indexes. Per-document tagging
// failures are reported, never fatal. With embed given, every distinct value
// receives a unit-norm embedding.
BuildResult build_index(const Corpus& corpus, std::span<const CubeSpec> specs,
                        ChatBackend& chat, EmbeddingBackend* embed = nullptr);

// Directory layout: manifest.json + manifest.crc32, one postings file per
// occupied dimension, doc_tags.bin, and embeddings.bin when present. Every
// data file is CRC-checksummed; serialization is canonical, so equal indexes
// produce byte-identical directories.
void save_index(const CubeIndex& index, const std::filesystem::path& dir);
CubeIndex load_index(const std::filesystem::path& dir);

// Canonical byte string covering all persisted sections; equal indexes yield
// equal bytes.
std::string canonical_serialization(const CubeIndex& index);

std::uint32_t crc32(std::string_view data);

}  // namespace cubeqa
