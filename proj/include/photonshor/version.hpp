#pragma once

#define PHOTONSHOR_VERSION "0.1.0"
