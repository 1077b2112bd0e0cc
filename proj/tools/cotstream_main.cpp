#include "cotstream/cotstream.h"

int main(int argc, char** argv) { return cotstream_cli_execute(argc, argv); }
