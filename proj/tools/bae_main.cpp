#include "bae/cli.hpp"

int main(int argc, char** argv) { return bae::run(argc, argv); }
