#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace statescope {

std::string sha256_hex(std::string_view data);

std::string base64_encode(std::string_view data);
/// Throws Error("InvalidBase64") on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace statescope
