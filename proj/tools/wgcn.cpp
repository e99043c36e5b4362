#include "wgcn/alloc_tracking.hpp"
#include "wgcn/cli.hpp"

WGCN_INSTALL_ALLOCATION_TRACKING()

int main(int argc, char** argv) { return wgcn::cli::run(argc, argv); }
