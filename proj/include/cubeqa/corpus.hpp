#pragma once
// Document corpus: ordered, id-addressable, loaded from line-delimited JSON.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cubeqa {

struct Document {
    std::string doc_id;
    std::optional<std::string> title;  // missing is distinct from empty
    std::string text;

    bool operator==(const Document&) const = default;
};

class Corpus {
public:
    Corpus() = default;
    // Validates ids (non-empty, unique) and texts (non-empty); throws on violation.
    explicit Corpus(std::vector<Document> docs);

    const std::vector<Document>& documents() const { return docs_; }
    std::size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }
    bool contains(std::string_view doc_id) const;
    const Document* find(std::string_view doc_id) const;     // nullptr when absent
    const Document& at(std::string_view doc_id) const;       // throws when absent

    auto begin() const { return docs_.begin(); }
    auto end() const { return docs_.end(); }

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

// One JSON object per line: {"id": ..., "title"?: ..., "text": ...}.
// Unknown fields ignored. Malformed lines and duplicate ids reject the load.
Corpus load_corpus(const std::filesystem::path& path);

// Writes the same line-delimited format load_corpus reads.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Returns a corpus extended by docs. Throws on id collision (with the
// original corpus or within docs); the input corpus is never modified.
Corpus append_documents(const Corpus& corpus, std::span<const Document> docs);

}  // namespace cubeqa
