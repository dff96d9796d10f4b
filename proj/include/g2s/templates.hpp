#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace g2s {

using Vars = std::map<std::string, std::string, std::less<>>;

/// Replaces every `{{name}}` in `tmpl` from `vars`. A placeholder with no
/// binding is a TemplateError; substituted values are not rescanned.
std::string render(std::string_view tmpl, const Vars& vars);

/// Prompt assets loaded from a directory of `*.tmpl` files.
///
/// A file is split into sections by lines of the form `@@name`; text before
/// the first marker is ignored. Section bodies have their surrounding blank
/// lines removed. Assets are addressed as "file/section", e.g.
/// "alpha_captain/task".
class TemplateStore {
public:
    static TemplateStore load(const std::filesystem::path& dir);
    /// The directory baked in at build time.
    static TemplateStore load_default();

    /// Throws TemplateError when the asset is missing.
    const std::string& get(std::string_view file, std::string_view section) const;
    bool contains(std::string_view file, std::string_view section) const;

    std::string render(std::string_view file, std::string_view section, const Vars& vars) const;

    const std::string& version() const noexcept { return version_; }
    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
    std::string version_;
    std::map<std::string, std::string, std::less<>> sections_;
};

}  // namespace g2s
