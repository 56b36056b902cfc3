#include "mftg/cli.hpp"

int main(int argc, char** argv) { return mftg::run(argc, argv); }
