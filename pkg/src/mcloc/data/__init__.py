""" Package data: the default scenario configuration """
