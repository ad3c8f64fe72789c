#ifndef KINFORGE_VERSION_HPP
#define KINFORGE_VERSION_HPP

namespace kinforge {
inline constexpr const char* kVersion = "0.1.0";
}

#endif
