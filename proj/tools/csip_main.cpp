#include "csip/cli.hpp"

int main(int argc, char** argv) { return csip::cli::dispatch(argc, argv); }
