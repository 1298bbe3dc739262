#pragma once

#include <map>
#include <string>
#include <string_view>

namespace cofcot {

using TemplateVars = std::map<std::string, std::string>;

// Minimal prompt template language:
//   {name}             replaced by vars[name]; a name missing from vars is a TemplateError
//   {#name}...{/name}  kept only when vars[name] exists and is non-empty
//   {{ and }}          literal braces
// Leading lines that start with '#' are file-header comments and are dropped.
// Substituted values are never re-scanned.
std::string render_template(std::string_view tmpl, const TemplateVars& vars);

std::string strip_header(std::string_view tmpl);

// Reads <dir>/<name>. Throws TemplateError when the file cannot be read.
std::string load_template_file(const std::string& dir, const std::string& name);

// Directory holding the shipped templates (one subdirectory per strategy).
std::string default_template_dir();

}  // namespace cofcot
