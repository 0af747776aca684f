#include "cubeqa/corpus.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace cubeqa {

using nlohmann::json;

Corpus::Corpus(std::vector<Document> docs) : docs_(std::move(docs)) {
    by_id_.reserve(docs_.size());
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        const auto& d = docs_[i];
        if (d.doc_id.empty()) throw std::runtime_error("corpus: document with empty id");
        if (d.text.empty())
            throw std::runtime_error("corpus: document '" + d.doc_id + "' has empty text");
        if (!by_id_.emplace(d.doc_id, i).second)
            throw std::runtime_error("corpus: duplicate doc_id '" + d.doc_id + "'");
    }
}

bool Corpus::contains(std::string_view doc_id) const {
    return by_id_.find(std::string(doc_id)) != by_id_.end();
}

const Document* Corpus::find(std::string_view doc_id) const {
    auto it = by_id_.find(std::string(doc_id));
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

const Document& Corpus::at(std::string_view doc_id) const {
    const Document* d = find(doc_id);
    if (!d) throw std::runtime_error("corpus: unknown doc_id '" + std::string(doc_id) + "'");
    return *d;
}

Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("corpus: cannot open " + path.string());

    std::vector<Document> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw std::runtime_error("corpus: malformed record at line " +
                                     std::to_string(line_no) + " of " + path.string());
        if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty())
            throw std::runtime_error("corpus: missing or empty 'id' at line " +
                                     std::to_string(line_no));
        if (!j.contains("text") || !j["text"].is_string() ||
            j["text"].get<std::string>().empty())
            throw std::runtime_error("corpus: missing or empty 'text' at line " +
                                     std::to_string(line_no));
        Document d;
        d.doc_id = j["id"].get<std::string>();
        d.text = j["text"].get<std::string>();
        if (j.contains("title") && j["title"].is_string())
            d.title = j["title"].get<std::string>();
        docs.push_back(std::move(d));
    }
    try {
        return Corpus(std::move(docs));
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string(e.what()) + " in " + path.string());
    }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("corpus: cannot write " + path.string());
    for (const auto& d : corpus) {
        json j;
        j["id"] = d.doc_id;
        if (d.title) j["title"] = *d.title;
        j["text"] = d.text;
        out << j.dump() << "\n";
    }
    if (!out) throw std::runtime_error("corpus: write failed for " + path.string());
}

Corpus append_documents(const Corpus& corpus, std::span<const Document> docs) {
    for (const auto& d : docs) {
        if (corpus.contains(d.doc_id))
            throw std::runtime_error("corpus: append collides with existing doc_id '" +
                                     d.doc_id + "'");
    }
    std::vector<Document> merged = corpus.documents();
    merged.insert(merged.end(), docs.begin(), docs.end());
    return Corpus(std::move(merged));  // re-validates intra-batch duplicates
}

}  // namespace cubeqa
