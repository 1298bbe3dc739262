#include "cofcot/prompt_template.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cofcot/error.hpp"

namespace cofcot {
namespace {

bool is_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Returns the position just past the matching {/name}, or npos.
std::size_t find_section_end(std::string_view t, std::size_t from, const std::string& name, std::size_t* body_end) {
  const std::string open = "{#" + name + "}";
  const std::string close = "{/" + name + "}";
  int depth = 1;
  std::size_t i = from;
  while (i < t.size()) {
    if (t.compare(i, open.size(), open) == 0) {
      ++depth;
      i += open.size();
    } else if (t.compare(i, close.size(), close) == 0) {
      if (--depth == 0) {
        *body_end = i;
        return i + close.size();
      }
      i += close.size();
    } else {
      ++i;
    }
  }
  return std::string_view::npos;
}

void render_into(std::string_view t, const TemplateVars& vars, std::string& out) {
  std::size_t i = 0;
  while (i < t.size()) {
    const char c = t[i];
    if (c == '{' && i + 1 < t.size() && t[i + 1] == '{') {
      out += '{';
      i += 2;
      continue;
    }
    if (c == '}' && i + 1 < t.size() && t[i + 1] == '}') {
      out += '}';
      i += 2;
      continue;
    }
    if (c != '{') {
      out += c;
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    const bool section = j < t.size() && t[j] == '#';
    if (section) ++j;
    const std::size_t name_start = j;
    while (j < t.size() && is_name_char(t[j])) ++j;
    if (j == name_start || j >= t.size() || t[j] != '}') {
      throw Error(ErrorKind::TemplateError, "malformed placeholder at offset " + std::to_string(i));
    }
    const std::string name(t.substr(name_start, j - name_start));
    if (!section) {
      const auto it = vars.find(name);
      if (it == vars.end()) throw Error(ErrorKind::TemplateError, "no value for placeholder {" + name + "}");
      out += it->second;
      i = j + 1;
      continue;
    }
    std::size_t body_end = 0;
    const std::size_t after = find_section_end(t, j + 1, name, &body_end);
    if (after == std::string_view::npos) throw Error(ErrorKind::TemplateError, "unclosed section {#" + name + "}");
    const auto it = vars.find(name);
    if (it != vars.end() && !it->second.empty()) render_into(t.substr(j + 1, body_end - j - 1), vars, out);
    i = after;
  }
}

}  // namespace

std::string strip_header(std::string_view tmpl) {
  std::size_t i = 0;
  while (i < tmpl.size() && tmpl[i] == '#') {
    const std::size_t nl = tmpl.find('\n', i);
    if (nl == std::string_view::npos) return "";
    i = nl + 1;
  }
  return std::string(tmpl.substr(i));
}

std::string render_template(std::string_view tmpl, const TemplateVars& vars) {
  const std::string body = strip_header(tmpl);
  std::string out;
  out.reserve(body.size() + 256);
  render_into(body, vars, out);
  return out;
}

std::string load_template_file(const std::string& dir, const std::string& name) {
  const std::string path = dir + "/" + name;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::TemplateError, "cannot read template '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string default_template_dir() {
  if (const char* env = std::getenv("COFCOT_TEMPLATE_DIR"); env && *env) return env;
  return COFCOT_TEMPLATE_DIR;
}

}  // namespace cofcot
