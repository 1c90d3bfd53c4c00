// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

namespace labeldesc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace labeldesc
