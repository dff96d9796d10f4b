#include "g2s/templates.hpp"

#include <fstream>
#include <sstream>

#include "g2s/errors.hpp"
#include "g2s/text.hpp"

namespace g2s {

namespace {

std::string strip_blank_lines(const std::string& body) {
    auto first = body.find_first_not_of("\r\n");
    if (first == std::string::npos) return {};
    auto last = body.find_last_not_of(" \t\r\n");
    return body.substr(first, last - first + 1);
}

std::string key_of(std::string_view file, std::string_view section) {
    std::string k(file);
    k += '/';
    k += section;
    return k;
}

}  // namespace

std::string render(std::string_view tmpl, const Vars& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) throw TemplateError("unterminated placeholder");
        out.append(tmpl.substr(pos, open - pos));
        auto name = text::trim(tmpl.substr(open + 2, close - open - 2));
        auto it = vars.find(name);
        if (it == vars.end()) throw TemplateError("unbound placeholder {{" + name + "}}");
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

TemplateStore TemplateStore::load(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw TemplateError("template directory not found: " + dir.string());

    TemplateStore store;
    store.dir_ = dir;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto& p = entry.path();
        if (p.filename() == "VERSION") {
            std::ifstream in(p);
            std::getline(in, store.version_);
            store.version_ = text::trim(store.version_);
            continue;
        }
        if (p.extension() != ".tmpl") continue;

        std::ifstream in(p);
        std::string file = p.stem().string();
        std::string line, current, body;
        bool have_section = false;
        auto flush = [&] {
            if (have_section) store.sections_[key_of(file, current)] = strip_blank_lines(body);
        };
        while (std::getline(in, line)) {
            if (line.rfind("@@", 0) == 0) {
                flush();
                current = text::trim(std::string_view(line).substr(2));
                body.clear();
                have_section = true;
            } else if (have_section) {
                body += line;
                body += '\n';
            }
        }
        flush();
    }
    return store;
}

TemplateStore TemplateStore::load_default() {
    return load(G2S_DEFAULT_TEMPLATE_DIR);
}

const std::string& TemplateStore::get(std::string_view file, std::string_view section) const {
    auto it = sections_.find(key_of(file, section));
    if (it == sections_.end())
        throw TemplateError("missing template asset " + key_of(file, section) + " in " + dir_.string());
    return it->second;
}

bool TemplateStore::contains(std::string_view file, std::string_view section) const {
    return sections_.find(key_of(file, section)) != sections_.end();
}

std::string TemplateStore::render(std::string_view file, std::string_view section,
                                  const Vars& vars) const {
    return g2s::render(get(file, section), vars);
}

}  // namespace g2s
