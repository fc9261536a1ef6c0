import requests

def get(url, retries=3):
    while retries > 0:
        try:
            return requests.get(url, timeout=5)
        except requests.Timeout:
            retries -= 1
    return None

def links(page):
    return [a for a in page.split() if a.startswith('http') and not a.endswith('.png')]
