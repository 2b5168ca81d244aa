#include "finsler/metricfile.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace finsler {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Strip a trailing comment that is not inside a quoted string.
std::string_view strip_comment(std::string_view s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        else if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

[[noreturn]] void fail(const std::string& msg, int offset) {
    throw SyntaxError("metric file: " + msg, offset);
}

double parse_number(std::string_view s, int offset) {
    s = trim(s);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        fail("expected a number, got '" + std::string(s) + "'", offset);
    return v;
}

std::string parse_string(std::string_view s, int offset) {
    s = trim(s);
    if (s.size() < 2 || s.front() != '"' || s.back() != '"')
        fail("expected a double-quoted string, got '" + std::string(s) + "'", offset);
    return std::string(s.substr(1, s.size() - 2));
}

// Split a bracketed array body into top-level comma-separated items.
std::vector<std::string> split_array(std::string_view body, int offset) {
    std::vector<std::string> items;
    std::string cur;
    bool quoted = false;
    int depth = 0;
    for (char c : body) {
        if (c == '"') quoted = !quoted;
        if (!quoted) {
            if (c == '(' || c == '[') ++depth;
            if (c == ')' || c == ']') --depth;
            if (c == ',' && depth == 0) {
                items.push_back(cur);
                cur.clear();
                continue;
            }
        }
        cur += c;
    }
    if (quoted || depth != 0) fail("unbalanced array", offset);
    if (!trim(cur).empty()) items.push_back(cur);
    for (auto& it : items) it = std::string(trim(it));
    return items;
}

// Turn one domain requirement string into a DomainTerm.  Accepted shapes:
//   "expr"            -> expr > 0
//   "a > b" / "a < b" -> (a-b) > 0 / (b-a) > 0 (also >=, <=)
//   "a != b"          -> (a-b) != 0
DomainTerm parse_domain_term(const std::string& src, int offset) {
    int depth = 0;
    std::size_t op_pos = std::string::npos;
    std::string op;
    for (std::size_t i = 0; i < src.size(); ++i) {
        char c = src[i];
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (depth != 0) continue;
        if (c == '>' || c == '<') {
            op_pos = i;
            op = c;
            if (i + 1 < src.size() && src[i + 1] == '=') op += '=';
            break;
        }
        if (c == '!' && i + 1 < src.size() && src[i + 1] == '=') {
            op_pos = i;
            op = "!=";
            break;
        }
    }
    DomainTerm term;
    term.src = src;
    if (op_pos == std::string::npos) {
        term.expr = parse_expr(src);
        term.positive = true;
        return term;
    }
    std::string lhs(trim(std::string_view(src).substr(0, op_pos)));
    std::string rhs(trim(std::string_view(src).substr(op_pos + op.size())));
    if (lhs.empty() || rhs.empty()) fail("malformed inequality '" + src + "'", offset);
    std::string diff;
    if (op == ">" || op == ">=" || op == "!=")
        diff = "(" + lhs + ") - (" + rhs + ")";
    else
        diff = "(" + rhs + ") - (" + lhs + ")";
    term.expr = parse_expr(diff);
    term.positive = (op != "!=");
    return term;
}

bool valid_key(std::string_view s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s.front())) && s.front() != '_') return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

} // namespace

MetricDef parse_metric_def(std::string_view text) {
    MetricDef def;
    std::string section;  // "", "params", "let", "domain", "box"
    bool saw_box = false;
    std::array<std::array<double, 2>, 4> box{};
    std::array<bool, 4> box_set{};

    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        int offset = static_cast<int>(pos);
        std::string_view line = trim(strip_comment(text.substr(pos, eol - pos)));
        pos = eol + 1;
        if (line.empty()) {
            if (pos > text.size()) break;
            continue;
        }

        if (line.front() == '[') {
            if (line.back() != ']') fail("malformed section header '" + std::string(line) + "'", offset);
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section != "params" && section != "let" && section != "domain" && section != "box")
                fail("unknown section [" + section + "]", offset);
            continue;
        }

        std::size_t eq = std::string_view::npos;
        {
            bool quoted = false;
            for (std::size_t i = 0; i < line.size(); ++i) {
                if (line[i] == '"') quoted = !quoted;
                else if (line[i] == '=' && !quoted) { eq = i; break; }
            }
        }
        if (eq == std::string_view::npos) fail("expected 'key = value' in '" + std::string(line) + "'", offset);
        std::string key(trim(line.substr(0, eq)));
        std::string value(trim(line.substr(eq + 1)));
        if (!valid_key(key)) fail("invalid key '" + key + "'", offset);

        // multi-line arrays: keep consuming lines until brackets balance
        if (!value.empty() && value.front() == '[') {
            auto balance = [](std::string_view s) {
                int d = 0;
                bool q = false;
                for (char c : s) {
                    if (c == '"') q = !q;
                    if (q) continue;
                    if (c == '[') ++d;
                    if (c == ']') --d;
                }
                return d;
            };
            while (balance(value) != 0 && pos <= text.size()) {
                std::size_t e2 = text.find('\n', pos);
                if (e2 == std::string_view::npos) e2 = text.size();
                value += ' ';
                value += std::string(trim(strip_comment(text.substr(pos, e2 - pos))));
                pos = e2 + 1;
            }
            if (balance(value) != 0) fail("unbalanced array for key '" + key + "'", offset);
        }

        auto reject_duplicate = [&](bool already) {
            if (already) fail("duplicate key '" + key + "'", offset);
        };
        if (section.empty()) {
            if (key == "name") { reject_duplicate(!def.name.empty()); def.name = parse_string(value, offset); }
            else if (key == "F") { reject_duplicate(!def.F_src.empty()); def.F_src = parse_string(value, offset); }
            else if (key == "phi") { reject_duplicate(!def.phi_src.empty()); def.phi_src = parse_string(value, offset); }
            else fail("unknown top-level key '" + key + "'", offset);
        } else if (section == "params") {
            for (const auto& [k, v] : def.params) reject_duplicate(k == key);
            def.params.emplace_back(key, parse_number(value, offset));
        } else if (section == "let") {
            for (const auto& [k, e] : def.lets) reject_duplicate(k == key);
            std::string src = parse_string(value, offset);
            try {
                def.lets.emplace_back(key, parse_expr(src));
            } catch (SyntaxError& e) {
                fail("in let binding '" + key + "': " + e.what(), offset);
            }
        } else if (section == "domain") {
            if (key != "require") fail("unknown [domain] key '" + key + "'", offset);
            if (value.size() < 2 || value.front() != '[' || value.back() != ']')
                fail("[domain] require must be an array of strings", offset);
            for (const auto& item : split_array(std::string_view(value).substr(1, value.size() - 2), offset)) {
                std::string src = parse_string(item, offset);
                try {
                    def.domain.push_back(parse_domain_term(src, offset));
                } catch (SyntaxError& e) {
                    fail("in domain term '" + src + "': " + e.what(), offset);
                }
            }
        } else if (section == "box") {
            int var = key == "x1" ? 0 : key == "x2" ? 1 : key == "y1" ? 2 : key == "y2" ? 3 : -1;
            if (var < 0) fail("unknown [box] key '" + key + "' (expected x1, x2, y1 or y2)", offset);
            reject_duplicate(box_set[var]);
            if (value.size() < 2 || value.front() != '[' || value.back() != ']')
                fail("[box] entries must be two-element arrays", offset);
            auto items = split_array(std::string_view(value).substr(1, value.size() - 2), offset);
            if (items.size() != 2) fail("[box] entries must be two-element arrays", offset);
            box[var][0] = parse_number(items[0], offset);
            box[var][1] = parse_number(items[1], offset);
            if (!(box[var][0] < box[var][1])) fail("[box] " + key + " must satisfy lo < hi", offset);
            box_set[var] = true;
            saw_box = true;
        }
        if (pos > text.size()) break;
    }

    if (def.F_src.empty()) fail("missing required key 'F'", 0);
    try {
        def.F = parse_expr(def.F_src);
    } catch (SyntaxError& e) {
        fail(std::string("in F: ") + e.what(), 0);
    }
    if (!def.phi_src.empty()) {
        try {
            def.phi = parse_expr(def.phi_src);
        } catch (SyntaxError& e) {
            fail(std::string("in phi: ") + e.what(), 0);
        }
    }
    if (saw_box) {
        for (int v = 0; v < 4; ++v)
            if (!box_set[v]) fail("[box] must set all of x1, x2, y1, y2", 0);
        def.box = box;
    }

    // resolve all names now so bad files fail at load time, not at eval time
    (void)def.lower();
    return def;
}

MetricDef load_metric_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open metric file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_metric_def(ss.str());
}

MetricDef::Lowered MetricDef::lower() const {
    SymbolTable table;
    for (const auto& [k, v] : params) table[k] = fconst(v);
    for (const auto& [k, e] : lets) table[k] = ftag(k, lower_expr(*e, table));

    Lowered out;
    out.F = ftag("F", lower_expr(*F, table));
    if (phi) out.phi = ftag("phi", lower_expr(*phi, table));
    out.domain.reserve(domain.size());
    for (const auto& term : domain) out.domain.emplace_back(lower_expr(*term.expr, table), term.positive);
    return out;
}

} // namespace finsler
