import matplotlib.pyplot as plt

def bar(values, title=None):
    fig, ax = plt.subplots()
    ax.bar(range(len(values)), values)
    if title:
        ax.set_title(title)
    return fig
