#pragma once

#include <string>

namespace attackscope {

// 9 significant digits; "nan" / "inf" / "-inf" for non-finite values.
std::string format_number(double value);

// Value rounded to 9 significant digits, for JSON output.
double round9(double value);

}  // namespace attackscope
