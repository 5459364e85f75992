public class PalindromeChecker {
    boolean isPalindrome(Queue<Character> queue) { return missing() }
}
