#pragma once

#include <string>

namespace compass {

// 128 random bits as 32 lowercase hex characters.
std::string random_id();

}  // namespace compass
