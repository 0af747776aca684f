#include "cubeqa/normalize.hpp"

#include <cstdint>
#include <vector>

namespace cubeqa {

namespace {

// Decodes one UTF-8 code point at s[i]. Invalid sequences are consumed one
// byte at a time and passed through untouched.
uint32_t decode_utf8(std::string_view s, size_t& i, bool& valid) {
    const auto byte = [&](size_t k) { return static_cast<unsigned char>(s[k]); };
    unsigned char b0 = byte(i);
    valid = true;
    if (b0 < 0x80) {
        i += 1;
        return b0;
    }
    auto cont = [&](size_t k) { return k < s.size() && (byte(k) & 0xC0) == 0x80; };
    if ((b0 & 0xE0) == 0xC0 && cont(i + 1)) {
        uint32_t cp = (uint32_t(b0 & 0x1F) << 6) | (byte(i + 1) & 0x3F);
        i += 2;
        return cp;
    }
    if ((b0 & 0xF0) == 0xE0 && cont(i + 1) && cont(i + 2)) {
        uint32_t cp = (uint32_t(b0 & 0x0F) << 12) | (uint32_t(byte(i + 1) & 0x3F) << 6) |
                      (byte(i + 2) & 0x3F);
        i += 3;
        return cp;
    }
    if ((b0 & 0xF8) == 0xF0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
        uint32_t cp = (uint32_t(b0 & 0x07) << 18) | (uint32_t(byte(i + 1) & 0x3F) << 12) |
                      (uint32_t(byte(i + 2) & 0x3F) << 6) | (byte(i + 3) & 0x3F);
        i += 4;
        return cp;
    }
    valid = false;
    i += 1;
    return b0;
}

void encode_utf8(uint32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_space_cp(uint32_t cp) {
    switch (cp) {
        case ' ': case '\t': case '\n': case '\r': case '\f': case '\v':
        case 0x00A0:  // no-break space
        case 0x202F:  // narrow no-break space
        case 0x205F:  // medium mathematical space
        case 0x3000:  // ideographic space
        case 0x200B:  // zero width space
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;  // en quad .. hair space
    }
}

// Compatibility fold plus case fold for the ranges this engine cares about.
// Appends the folded form of cp to out; returns false when cp folded to
// whitespace (caller handles collapsing).
bool fold_codepoint(uint32_t cp, std::string& out) {
    if (is_space_cp(cp)) return false;
    // fullwidth ASCII block
    if (cp >= 0xFF01 && cp <= 0xFF5E) cp -= 0xFEE0;
    switch (cp) {
        case 0x2018: case 0x2019: case 0x201A: case 0x201B: case 0x00B4:
            cp = '\''; break;
        case 0x201C: case 0x201D: case 0x201E: case 0x201F:
        case 0x00AB: case 0x00BB:
            cp = '"'; break;
        case 0x2010: case 0x2011: case 0x2012: case 0x2013:
        case 0x2014: case 0x2015: case 0x2212:
            cp = '-'; break;
        case 0x2026:
            out += "...";
            return true;
        case 0xFB01:
            out += "fi";
            return true;
        case 0xFB02:
            out += "fl";
            return true;
        default:
            break;
    }
    if (cp >= 'A' && cp <= 'Z') {
        cp += 0x20;
    } else if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) {
        cp += 0x20;  // Latin-1 uppercase letters
    }
    encode_utf8(cp, out);
    return true;
}

bool is_quote_char(char c) { return c == '"' || c == '\''; }

}  // namespace

std::string normalize_value(std::string_view raw) {
    std::string folded;
    folded.reserve(raw.size());
    bool pending_space = false;
    bool any = false;
    size_t i = 0;
    while (i < raw.size()) {
        bool valid = false;
        size_t before = i;
        uint32_t cp = decode_utf8(raw, i, valid);
        if (!valid) {
            // opaque byte, keep verbatim
            if (pending_space && any) folded.push_back(' ');
            pending_space = false;
            folded.push_back(raw[before]);
            any = true;
            continue;
        }
        std::string piece;
        if (!fold_codepoint(cp, piece)) {
            pending_space = true;
            continue;
        }
        if (pending_space && any) folded.push_back(' ');
        pending_space = false;
        folded += piece;
        any = true;
    }

    // strip enclosing quote pairs, then re-trim; a pair only counts as
    // enclosing when that quote character does not recur inside
    std::string_view v = folded;
    for (;;) {
        while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
        while (!v.empty() && v.back() == ' ') v.remove_suffix(1);
        if (v.size() >= 2 && is_quote_char(v.front()) && v.front() == v.back() &&
            v.substr(1, v.size() - 2).find(v.front()) == std::string_view::npos) {
            v.remove_prefix(1);
            v.remove_suffix(1);
            continue;
        }
        break;
    }
    return std::string(v);
}

}  // namespace cubeqa
