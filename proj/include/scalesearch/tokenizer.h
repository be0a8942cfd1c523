#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace scalesearch {

// Lowercases ASCII letters and splits on every ASCII character that is not a
// letter or digit. Bytes >= 0x80 (UTF-8 sequences) stay inside tokens
// unchanged. Empty tokens are dropped.
std::vector<std::string> Tokenize(std::string_view text);

}  // namespace scalesearch
