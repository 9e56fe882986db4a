#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"

// Deterministic text output helpers.  All floating-point values are printed
// with %.17g so that files are byte-identical across runs and round-trip to
// the same double.

namespace torusgw {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Minimal JSON document builder: preserves insertion order of object keys and
// prints numbers via fmt17.  nlohmann/json is used for *parsing* configs; this
// writer exists so emitted reports are byte-deterministic.
class JsonValue {
public:
    using Ptr = std::shared_ptr<JsonValue>;
    enum class Type { object, array, string, number, integer, boolean, null };

    static Ptr object() { return make(Type::object); }
    static Ptr array() { return make(Type::array); }
    static Ptr str(std::string s) { auto p = make(Type::string); p->str_ = std::move(s); return p; }
    static Ptr num(double v) { auto p = make(Type::number); p->num_ = v; return p; }
    static Ptr integer(long long v) { auto p = make(Type::integer); p->int_ = v; return p; }
    static Ptr boolean(bool b) { auto p = make(Type::boolean); p->bool_ = b; return p; }

    JsonValue& set(const std::string& key, Ptr v) {
        keys_.push_back(key);
        members_[key] = std::move(v);
        return *this;
    }
    JsonValue& set(const std::string& key, double v) { return set(key, num(v)); }
    JsonValue& set(const std::string& key, long long v) { return set(key, integer(v)); }
    JsonValue& set(const std::string& key, int v) { return set(key, integer(v)); }
    JsonValue& set(const std::string& key, const std::string& v) { return set(key, str(v)); }
    JsonValue& set(const std::string& key, const char* v) { return set(key, str(v)); }
    JsonValue& set(const std::string& key, bool v) { return set(key, boolean(v)); }
    JsonValue& push(Ptr v) { items_.push_back(std::move(v)); return *this; }
    JsonValue& push(double v) { return push(num(v)); }

    void write(std::string& out, int indent = 0) const {
        const std::string pad(indent, ' '), pad2(indent + 2, ' ');
        switch (type_) {
            case Type::object: {
                if (keys_.empty()) { out += "{}"; break; }
                out += "{\n";
                for (size_t i = 0; i < keys_.size(); ++i) {
                    out += pad2 + '"' + escape(keys_[i]) + "\": ";
                    members_.at(keys_[i])->write(out, indent + 2);
                    out += (i + 1 < keys_.size()) ? ",\n" : "\n";
                }
                out += pad + "}";
                break;
            }
            case Type::array: {
                if (items_.empty()) { out += "[]"; break; }
                out += "[\n";
                for (size_t i = 0; i < items_.size(); ++i) {
                    out += pad2;
                    items_[i]->write(out, indent + 2);
                    out += (i + 1 < items_.size()) ? ",\n" : "\n";
                }
                out += pad + "]";
                break;
            }
            case Type::string: out += '"' + escape(str_) + '"'; break;
            case Type::number: out += fmt17(num_); break;
            case Type::integer: out += std::to_string(int_); break;
            case Type::boolean: out += bool_ ? "true" : "false"; break;
            case Type::null: out += "null"; break;
        }
    }

    std::string dump() const {
        std::string s;
        write(s);
        s += "\n";
        return s;
    }

private:
    static Ptr make(Type t) { auto p = std::make_shared<JsonValue>(); p->type_ = t; return p; }
    static std::string escape(const std::string& s) {
        std::string r;
        for (char c : s) {
            switch (c) {
                case '"': r += "\\\""; break;
                case '\\': r += "\\\\"; break;
                case '\n': r += "\\n"; break;
                case '\t': r += "\\t"; break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof buf, "\\u%04x", c);
                        r += buf;
                    } else r += c;
            }
        }
        return r;
    }

    Type type_ = Type::null;
    std::vector<std::string> keys_;
    std::map<std::string, Ptr> members_;
    std::vector<Ptr> items_;
    std::string str_;
    double num_ = 0;
    long long int_ = 0;
    bool bool_ = false;
};

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "io", "cannot open for writing: " + path);
    out << content;
    require(out.good(), "io", "write failed: " + path);
}

} // namespace torusgw
