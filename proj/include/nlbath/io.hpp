// io.hpp — CSV and JSON artifact writers. Floats carry 17 significant
// digits so repeated runs round-trip byte-identically.

#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nlbath::io {

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// ------------------------------------ CSV ------------------------------------

// RFC-4180: quote fields containing commas, quotes, or line breaks.
inline std::string csv_escape(std::string_view field) {
    const bool needs_quote = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs_quote) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << csv_escape(fields[i]);
        }
        out_ << "\r\n";
    }

private:
    std::ofstream out_;
};

// ------------------------------------ JSON -----------------------------------

// Minimal ordered JSON value; keys serialize in insertion order and numbers
// with 17 significant digits.
class Json {
public:
    using Ptr = std::shared_ptr<Json>;

    static Json object() { Json j; j.kind_ = Kind::Object; return j; }
    static Json array() { Json j; j.kind_ = Kind::Array; return j; }
    static Json number(double x) { Json j; j.kind_ = Kind::Number; j.num_ = x; return j; }
    static Json integer(std::int64_t x) { Json j; j.kind_ = Kind::Integer; j.int_ = x; return j; }
    static Json uinteger(std::uint64_t x) { Json j; j.kind_ = Kind::UInteger; j.uint_ = x; return j; }
    static Json boolean(bool b) { Json j; j.kind_ = Kind::Bool; j.bool_ = b; return j; }
    static Json string(std::string s) { Json j; j.kind_ = Kind::String; j.str_ = std::move(s); return j; }

    Json& set(const std::string& key, Json value) {
        keys_.push_back(key);
        members_.push_back(std::make_shared<Json>(std::move(value)));
        return *this;
    }
    Json& push(Json value) {
        members_.push_back(std::make_shared<Json>(std::move(value)));
        return *this;
    }

    std::string dump(int indent = 2) const {
        std::ostringstream os;
        write(os, indent, 0);
        os << "\n";
        return os.str();
    }

private:
    enum class Kind { Object, Array, Number, Integer, UInteger, Bool, String };
    Kind kind_{Kind::Object};
    double num_{0.0};
    std::int64_t int_{0};
    std::uint64_t uint_{0};
    bool bool_{false};
    std::string str_;
    std::vector<std::string> keys_;
    std::vector<Ptr> members_;

    static void write_escaped(std::ostream& os, std::string_view s) {
        os << '"';
        for (char c : s) {
            switch (c) {
                case '"': os << "\\\""; break;
                case '\\': os << "\\\\"; break;
                case '\n': os << "\\n"; break;
                case '\r': os << "\\r"; break;
                case '\t': os << "\\t"; break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                        os << buf;
                    } else {
                        os << c;
                    }
            }
        }
        os << '"';
    }

    void write(std::ostream& os, int indent, int depth) const {
        const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
        const std::string pad0(static_cast<std::size_t>(indent * depth), ' ');
        switch (kind_) {
            case Kind::Object: {
                if (members_.empty()) { os << "{}"; return; }
                os << "{\n";
                for (std::size_t i = 0; i < members_.size(); ++i) {
                    os << pad;
                    write_escaped(os, keys_[i]);
                    os << ": ";
                    members_[i]->write(os, indent, depth + 1);
                    if (i + 1 < members_.size()) os << ',';
                    os << '\n';
                }
                os << pad0 << '}';
                return;
            }
            case Kind::Array: {
                if (members_.empty()) { os << "[]"; return; }
                os << "[\n";
                for (std::size_t i = 0; i < members_.size(); ++i) {
                    os << pad;
                    members_[i]->write(os, indent, depth + 1);
                    if (i + 1 < members_.size()) os << ',';
                    os << '\n';
                }
                os << pad0 << ']';
                return;
            }
            case Kind::Number: os << format_double(num_); return;
            case Kind::Integer: os << int_; return;
            case Kind::UInteger: os << uint_; return;
            case Kind::Bool: os << (bool_ ? "true" : "false"); return;
            case Kind::String: write_escaped(os, str_); return;
        }
    }
};

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << content;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

} // namespace nlbath::io
