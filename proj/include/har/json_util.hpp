#pragma once

#include "har/errors.hpp"
#include "har/text_util.hpp"

#include <json.hpp>

#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace har::jsonl {

using json = nlohmann::json;

// Fixed 9-decimal quantization so emitted numbers are stable across runs.
inline double round9(double x) {
    if (!std::isfinite(x)) return x;
    const double r = std::round(x * 1e9) / 1e9;
    return r == 0.0 ? 0.0 : r;  // no "-0.0"
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Line {
    std::size_t number;  // 1-based
    json value;
};

// Blank lines are skipped; a line that is not a JSON object raises SchemaError.
inline std::vector<Line> parse(const std::string& content) {
    std::vector<Line> out;
    std::size_t ln = 0, pos = 0;
    while (pos <= content.size()) {
        std::size_t nl = content.find('\n', pos);
        if (nl == std::string::npos) nl = content.size();
        ++ln;
        std::string_view line(content.data() + pos, nl - pos);
        if (!text::is_blank(line)) {
            json j;
            try {
                j = json::parse(line);
            } catch (const json::parse_error& e) {
                throw SchemaError(ln, "<line>", std::string("invalid JSON: ") + e.what());
            }
            if (!j.is_object()) throw SchemaError(ln, "<line>", "expected a JSON object");
            out.push_back({ln, std::move(j)});
        }
        pos = nl + 1;
    }
    return out;
}

inline std::vector<Line> read(const std::string& path) { return parse(read_file(path)); }

inline std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::strict); }

// Writes to a file, or stdout when path is "-".
class Writer {
public:
    explicit Writer(const std::string& path) {
        if (path != "-") {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) throw IoError("cannot write " + path);
        }
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
    void line(const json& j) { stream() << dump(j) << '\n'; }
    void raw(const std::string& s) { stream() << s; }
    ~Writer() { stream().flush(); }

private:
    std::ofstream file_;
};

} // namespace har::jsonl
