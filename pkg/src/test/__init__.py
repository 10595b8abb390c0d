# test