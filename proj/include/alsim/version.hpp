#pragma once

#define ALSIM_VERSION "0.1.0"
