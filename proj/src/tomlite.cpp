#include "gradcode/tomlite.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gradcode {

namespace {

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Removes a trailing comment that is not inside a string literal.
std::string strip_comment(const std::string& s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_string = !in_string;
        if (s[i] == '#' && !in_string) return s.substr(0, i);
    }
    return s;
}

nlohmann::json parse_scalar(const std::string& raw, int lineno) {
    std::string v = strip(raw);
    if (v.empty()) throw std::runtime_error("toml: empty value at line " + std::to_string(lineno));
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"')
            throw std::runtime_error("toml: unterminated string at line " + std::to_string(lineno));
        return v.substr(1, v.size() - 2);
    }
    if (v == "true") return true;
    if (v == "false") return false;
    try {
        std::size_t used = 0;
        if (v.find_first_of(".eE") == std::string::npos ||
            (v.size() > 2 && v.rfind("0x", 0) == 0)) {
            long long i = std::stoll(v, &used);
            if (used == v.size()) return i;
        }
        double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (...) {
    }
    throw std::runtime_error("toml: cannot parse value '" + v + "' at line " +
                             std::to_string(lineno));
}

nlohmann::json parse_value(const std::string& raw, int lineno) {
    std::string v = strip(raw);
    if (!v.empty() && v.front() == '[') {
        if (v.back() != ']')
            throw std::runtime_error("toml: unterminated array at line " + std::to_string(lineno));
        nlohmann::json arr = nlohmann::json::array();
        std::string inner = v.substr(1, v.size() - 2);
        std::string item;
        bool in_string = false;
        for (char c : inner) {
            if (c == '"') in_string = !in_string;
            if (c == ',' && !in_string) {
                if (!strip(item).empty()) arr.push_back(parse_scalar(item, lineno));
                item.clear();
            } else {
                item.push_back(c);
            }
        }
        if (!strip(item).empty()) arr.push_back(parse_scalar(item, lineno));
        return arr;
    }
    return parse_scalar(v, lineno);
}

}  // namespace

nlohmann::json parse_toml(const std::string& text) {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* current = &root;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = strip(strip_comment(line));
        if (s.empty()) continue;
        if (s.rfind("[[", 0) == 0) {
            if (s.size() < 5 || s.substr(s.size() - 2) != "]]")
                throw std::runtime_error("toml: bad table array at line " + std::to_string(lineno));
            std::string name = strip(s.substr(2, s.size() - 4));
            if (!root.contains(name)) root[name] = nlohmann::json::array();
            if (!root[name].is_array())
                throw std::runtime_error("toml: '" + name + "' redefined as table array");
            root[name].push_back(nlohmann::json::object());
            current = &root[name].back();
        } else if (s.front() == '[') {
            if (s.back() != ']')
                throw std::runtime_error("toml: bad table header at line " + std::to_string(lineno));
            std::string name = strip(s.substr(1, s.size() - 2));
            nlohmann::json* target = &root;
            // dotted names nest; a leading segment matching the most recent
            // table array attaches to its last element
            std::size_t pos = 0;
            bool first = true;
            while (pos <= name.size()) {
                std::size_t dot = name.find('.', pos);
                std::string seg = strip(name.substr(pos, dot == std::string::npos
                                                             ? std::string::npos
                                                             : dot - pos));
                if (seg.empty())
                    throw std::runtime_error("toml: empty table segment at line " +
                                             std::to_string(lineno));
                if (first && target->contains(seg) && (*target)[seg].is_array()) {
                    target = &(*target)[seg].back();
                } else {
                    if (!target->contains(seg)) (*target)[seg] = nlohmann::json::object();
                    target = &(*target)[seg];
                }
                first = false;
                if (dot == std::string::npos) break;
                pos = dot + 1;
            }
            current = target;
        } else {
            std::size_t eq = s.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("toml: expected key=value at line " +
                                         std::to_string(lineno));
            std::string key = strip(s.substr(0, eq));
            if (key.empty())
                throw std::runtime_error("toml: empty key at line " + std::to_string(lineno));
            (*current)[key] = parse_value(s.substr(eq + 1), lineno);
        }
    }
    return root;
}

nlohmann::json parse_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_toml(buf.str());
}

}  // namespace gradcode
