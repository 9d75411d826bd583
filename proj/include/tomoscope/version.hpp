#pragma once

namespace tomoscope {

#ifndef TOMOSCOPE_VERSION
#define TOMOSCOPE_VERSION "0.1.0"
#endif

inline const char* version() { return TOMOSCOPE_VERSION; }

}  // namespace tomoscope
