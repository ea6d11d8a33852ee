#pragma once

#define NETLAVARX_VERSION "0.1.0"
